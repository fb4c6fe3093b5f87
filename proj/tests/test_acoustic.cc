// tests/test_acoustic.cc
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "src/acoustic.h"

using namespace l2w;

namespace {

constexpr Real kLnEps = 1e-5;  // must match the engine's layernorm epsilon

AcousticConfig tiny_config() {
  AcousticConfig cfg;
  cfg.feature_dim = 4;
  cfg.frontend = {{8, 2}};  // GLU -> 4 channels
  cfg.overall_stride = 2;
  cfg.model_dim = 4;
  cfg.heads = 2;
  cfg.ffn_dim = 8;
  cfg.blocks = 1;
  cfg.embed_dim = 5;
  return cfg;
}

FeatureSequence random_feats(int frames, int dim, uint64_t seed) {
  Rng rng(seed);
  FeatureSequence f;
  f.frames = frames;
  f.dim = dim;
  f.values.resize(static_cast<size_t>(frames) * dim);
  for (auto& v : f.values) v = rng.uniform(-1, 1);
  return f;
}

}  // namespace

TEST_SUITE("acoustic") {

TEST_CASE("output length follows the ceil rule for every T") {
  for (int stride : {8, 16}) {
    AcousticConfig cfg = AcousticConfig::desk_default(stride);
    cfg.feature_dim = 4;
    cfg.blocks = 0;  // length comes from the front-end alone
    ParamStore ps;
    Rng rng(1);
    AcousticEncoder enc(cfg, ps, rng);
    for (int t = stride; t <= 200; t += 7) {
      Var out = enc.encode(random_feats(t, 4, 100 + t));
      CHECK(out->rows() == (t + stride - 1) / stride);
    }
  }
}

TEST_CASE("s=8 maps 80 frames to 10; s=16 halves it") {
  ParamStore p8, p16;
  Rng r8(2), r16(2);
  AcousticConfig c8 = AcousticConfig::desk_default(8);
  AcousticConfig c16 = AcousticConfig::desk_default(16);
  c8.feature_dim = c16.feature_dim = 4;
  c8.blocks = c16.blocks = 1;
  AcousticEncoder e8(c8, p8, r8);
  AcousticEncoder e16(c16, p16, r16);
  FeatureSequence f = random_feats(80, 4, 3);
  CHECK(e8.encode(f)->rows() == 10);
  CHECK(e16.encode(f)->rows() == 5);
}

TEST_CASE("every output frame sits inside the L2 ball") {
  AcousticConfig cfg = tiny_config();
  ParamStore ps;
  Rng rng(5);
  AcousticEncoder enc(cfg, ps, rng);
  // inflate the head so raw outputs overshoot
  for (auto& v : ps.get("acoustic/head/w")->value) v *= 50.0;
  Var out = enc.encode(random_feats(24, 4, 6));
  for (int t = 0; t < out->rows(); ++t) {
    Real sq = 0;
    for (int c = 0; c < out->cols(); ++c) sq += out->at(t, c) * out->at(t, c);
    CHECK(std::sqrt(sq) <= cfg.rho + 1e-6);
  }
}

TEST_CASE("too-short input names the minimum length") {
  AcousticConfig cfg = AcousticConfig::desk_default(8);
  cfg.feature_dim = 4;
  cfg.blocks = 0;
  ParamStore ps;
  Rng rng(7);
  AcousticEncoder enc(cfg, ps, rng);
  CHECK_THROWS_WITH_AS(enc.encode(random_feats(5, 4, 8)),
                       doctest::Contains("minimum"), Error);
}

TEST_CASE("attention rows sum to one") {
  AcousticConfig cfg = tiny_config();
  ParamStore ps;
  Rng rng(9);
  AcousticEncoder enc(cfg, ps, rng);
  Rng vr(10);
  std::vector<Real> hv(6 * cfg.model_dim);
  for (auto& v : hv) v = vr.uniform(-2, 2);
  Var h = constant({6, cfg.model_dim}, hv);
  for (int head = 0; head < cfg.heads; ++head) {
    Var probs = enc.attention_matrix(h, 0, head);
    for (int i = 0; i < probs->rows(); ++i) {
      Real s = 0;
      for (int j = 0; j < probs->cols(); ++j) s += probs->at(i, j);
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("single-position attention weight is exactly one") {
  AcousticConfig cfg = tiny_config();
  ParamStore ps;
  Rng rng(11);
  AcousticEncoder enc(cfg, ps, rng);
  std::vector<Real> hv = {0.3, -0.2, 0.9, 0.1};
  Var h = constant({1, cfg.model_dim}, hv);
  Var probs = enc.attention_matrix(h, 0, 0);
  CHECK(probs->value[0] == 1.0);
  Var out = enc.self_attention_block(h, 0);
  CHECK(out->rows() == 1);
  for (Real v : out->value) CHECK(std::isfinite(v));
}

TEST_CASE("2-position 1-head 2-dim block matches hand arithmetic") {
  AcousticConfig cfg;
  cfg.feature_dim = 3;
  cfg.frontend = {{4, 1}};
  cfg.overall_stride = 1;
  cfg.model_dim = 2;
  cfg.heads = 1;
  cfg.ffn_dim = 3;
  cfg.blocks = 1;
  cfg.embed_dim = 2;
  ParamStore ps;
  Rng rng(13);
  AcousticEncoder enc(cfg, ps, rng);

  std::vector<Real> hv = {0.5, -1.0, 1.5, 0.25};  // 2x2
  Var h = constant({2, 2}, hv);
  Var got = enc.self_attention_block(h, 0);

  auto P = [&](const std::string& n) { return ps.get(n)->value; };
  auto mat2 = [&](const std::vector<Real>& a, const std::vector<Real>& w,
                  int rows, int inner, int cols) {
    std::vector<Real> out(rows * cols, 0.0);
    for (int i = 0; i < rows; ++i)
      for (int k = 0; k < inner; ++k)
        for (int j = 0; j < cols; ++j)
          out[i * cols + j] += a[i * inner + k] * w[k * cols + j];
    return out;
  };
  auto q = mat2(hv, P("acoustic/block0/head0/q"), 2, 2, 2);
  auto k = mat2(hv, P("acoustic/block0/head0/k"), 2, 2, 2);
  auto v = mat2(hv, P("acoustic/block0/head0/v"), 2, 2, 2);
  // scores, scaled by 1/sqrt(head_dim) with head_dim = 2
  Real inv = 1.0 / std::sqrt(2.0);
  std::vector<Real> att(4);
  for (int i = 0; i < 2; ++i) {
    Real s0 = inv * (q[i * 2] * k[0] + q[i * 2 + 1] * k[1]);
    Real s1 = inv * (q[i * 2] * k[2] + q[i * 2 + 1] * k[3]);
    Real m = std::max(s0, s1);
    Real z = std::exp(s0 - m) + std::exp(s1 - m);
    att[i * 2] = std::exp(s0 - m) / z;
    att[i * 2 + 1] = std::exp(s1 - m) / z;
  }
  auto attv = mat2(att, v, 2, 2, 2);
  auto sa = mat2(attv, P("acoustic/block0/attn_out/w"), 2, 2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      sa[i * 2 + j] += P("acoustic/block0/attn_out/b")[j];
  auto ln = [&](std::vector<Real> x, const std::string& g,
                const std::string& b) {
    for (int i = 0; i < 2; ++i) {
      Real mean = (x[i * 2] + x[i * 2 + 1]) / 2;
      Real var = ((x[i * 2] - mean) * (x[i * 2] - mean) +
                  (x[i * 2 + 1] - mean) * (x[i * 2 + 1] - mean)) /
                 2;
      Real is = 1.0 / std::sqrt(var + kLnEps);
      for (int j = 0; j < 2; ++j)
        x[i * 2 + j] = (x[i * 2 + j] - mean) * is * P(g)[j] + P(b)[j];
    }
    return x;
  };
  std::vector<Real> z(4);
  for (int i = 0; i < 4; ++i) z[i] = sa[i] + hv[i];
  z = ln(z, "acoustic/block0/ln1/g", "acoustic/block0/ln1/b");
  auto f1 = mat2(z, P("acoustic/block0/ffn/w1"), 2, 2, 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) {
      f1[i * 3 + j] += P("acoustic/block0/ffn/b1")[j];
      f1[i * 3 + j] = std::max<Real>(0.0, f1[i * 3 + j]);
    }
  auto f2 = mat2(f1, P("acoustic/block0/ffn/w2"), 2, 3, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) f2[i * 2 + j] += P("acoustic/block0/ffn/b2")[j];
  std::vector<Real> out(4);
  for (int i = 0; i < 4; ++i) out[i] = f2[i] + z[i];
  out = ln(out, "acoustic/block0/ln2/g", "acoustic/block0/ln2/b");

  for (int i = 0; i < 4; ++i)
    CHECK(got->value[i] == doctest::Approx(out[i]).epsilon(1e-10));
}

TEST_CASE("gradients through a full block pass finite differences") {
  AcousticConfig cfg = tiny_config();
  ParamStore ps;
  Rng rng(17);
  AcousticEncoder enc(cfg, ps, rng);
  FeatureSequence f = random_feats(7, 4, 18);
  Rng pr(19);
  std::vector<Real> probe(4 * cfg.embed_dim);
  for (auto& v : probe) v = pr.uniform(-1, 1);
  Var pv = constant({4, cfg.embed_dim}, probe);
  // roundoff dominates below eps=1e-5 here; 1e-4 keeps truncation ~1e-7
  auto fn = [&] { return dot(enc.encode(f), pv); };
  CHECK(finite_difference_check(fn, ps.all(), 1e-4, 40) <= 1e-5);
}

TEST_CASE("dropout 0 means bitwise-deterministic encode") {
  AcousticConfig cfg = tiny_config();
  ParamStore ps;
  Rng rng(21);
  AcousticEncoder enc(cfg, ps, rng);
  FeatureSequence f = random_feats(12, 4, 22);
  Rng d1(5), d2(5);
  CHECK(enc.encode(f, &d1)->value == enc.encode(f, &d2)->value);
  CHECK(enc.encode(f)->value == enc.encode(f)->value);
}

TEST_CASE("dropout and layer drop only act when enabled") {
  AcousticConfig cfg = tiny_config();
  cfg.dropout = 0.5;
  ParamStore ps;
  Rng rng(23);
  AcousticEncoder enc(cfg, ps, rng);
  FeatureSequence f = random_feats(12, 4, 24);
  Var eval = enc.encode(f);  // no rng: evaluation mode
  Rng dr(77);
  Var train = enc.encode(f, &dr);
  CHECK(eval->value != train->value);

  cfg.dropout = 0.0;
  cfg.layer_drop = 1.0 - 1e-9;  // effectively always skip
  ParamStore ps2;
  Rng rng2(23);
  AcousticEncoder enc2(cfg, ps2, rng2);
  Rng dr2(78);
  Var skipped = enc2.encode(f, &dr2);
  for (Real v : skipped->value) CHECK(std::isfinite(v));
}

TEST_CASE("feature files round-trip") {
  FeatureSequence f = random_feats(9, 3, 31);
  // float32 storage: quantize expectation
  write_features("feat_rt.bin", f);
  FeatureSequence g = read_features("feat_rt.bin");
  CHECK(g.frames == 9);
  CHECK(g.dim == 3);
  for (size_t i = 0; i < f.values.size(); ++i)
    CHECK(g.values[i] == static_cast<Real>(static_cast<float>(f.values[i])));
}

TEST_CASE("manifest round-trips and resolves relative paths") {
  std::filesystem::create_directories("mani_dir");
  std::vector<ManifestEntry> entries = {
      {"utt1", "feats/a.bin", {"the", "cat"}},
      {"utt2", "feats/b.bin", {"sat"}},
  };
  write_manifest("mani_dir/test.manifest", entries);
  auto back = read_manifest("mani_dir/test.manifest");
  REQUIRE(back.size() == 2);
  CHECK(back[0].utt_id == "utt1");
  CHECK(back[0].words == std::vector<std::string>{"the", "cat"});
  CHECK(back[0].feature_path.find("mani_dir") != std::string::npos);
}

}  // TEST_SUITE
