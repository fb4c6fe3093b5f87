// src/acoustic.cc
#include "acoustic.h"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace l2w {

AcousticConfig AcousticConfig::desk_default(int stride) {
  AcousticConfig cfg;
  cfg.overall_stride = stride;
  std::vector<int> strides;
  if (stride == 8) {
    strides = {1, 2, 1, 2, 1, 2};
  } else if (stride == 16) {
    strides = {2, 2, 1, 2, 1, 2};
  } else {
    L2W_RAISE("acoustic config: no default front-end for stride " << stride);
  }
  for (size_t i = 0; i < strides.size(); ++i) {
    int pre_glu = (i + 1 == strides.size()) ? 2 * cfg.model_dim : 64;
    cfg.frontend.push_back({pre_glu, strides[i]});
  }
  return cfg;
}

void AcousticConfig::validate() const {
  L2W_CHECK(feature_dim > 0, "acoustic config: feature_dim must be positive");
  L2W_CHECK(!frontend.empty(), "acoustic config: empty front-end");
  int prod = 1;
  for (const auto& c : frontend) {
    L2W_CHECK(c.stride >= 1, "acoustic config: stride " << c.stride);
    L2W_CHECK(c.out_channels > 0 && c.out_channels % 2 == 0,
              "acoustic config: GLU conv channels must be even, got "
                  << c.out_channels);
    prod *= c.stride;
  }
  L2W_CHECK(prod == overall_stride,
            "acoustic config: front-end strides multiply to "
                << prod << " but overall_stride is " << overall_stride);
  L2W_CHECK(frontend.back().out_channels / 2 == model_dim,
            "acoustic config: last conv must produce model_dim="
                << model_dim << " channels after GLU");
  L2W_CHECK(blocks >= 0 && heads >= 1 && model_dim >= 1 && ffn_dim >= 1,
            "acoustic config: bad transformer sizes");
  L2W_CHECK(model_dim % heads == 0, "acoustic config: heads "
                                        << heads << " must divide model_dim "
                                        << model_dim);
  L2W_CHECK(dropout >= 0 && dropout < 1, "acoustic config: dropout rate");
  L2W_CHECK(layer_drop >= 0 && layer_drop < 1, "acoustic config: layer_drop");
  L2W_CHECK(embed_dim > 0 && rho > 0, "acoustic config: embed_dim/rho");
}

int AcousticEncoder::output_length(int frames, int stride) {
  return (frames + stride - 1) / stride;
}

AcousticEncoder::AcousticEncoder(const AcousticConfig& cfg, ParamStore& params,
                                 Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  int cin = cfg_.feature_dim;
  for (size_t l = 0; l < cfg_.frontend.size(); ++l) {
    const auto& spec = cfg_.frontend[l];
    Real scl = 1.0 / std::sqrt(static_cast<Real>(cfg_.kernel * cin));
    conv_w_.push_back(params.create("acoustic/conv" + std::to_string(l) + "/w",
                                    {cfg_.kernel, cin, spec.out_channels}, scl,
                                    rng));
    conv_b_.push_back(params.create("acoustic/conv" + std::to_string(l) + "/b",
                                    {spec.out_channels}, scl, rng));
    cin = spec.out_channels / 2;
  }
  const int m = cfg_.model_dim;
  const int hd = m / cfg_.heads;
  for (int i = 0; i < cfg_.blocks; ++i) {
    std::string base = "acoustic/block" + std::to_string(i) + "/";
    Block b;
    Real scl = 1.0 / std::sqrt(static_cast<Real>(m));
    for (int h = 0; h < cfg_.heads; ++h) {
      std::string hb = base + "head" + std::to_string(h) + "/";
      b.q.push_back(params.create(hb + "q", {m, hd}, scl, rng));
      b.k.push_back(params.create(hb + "k", {m, hd}, scl, rng));
      b.v.push_back(params.create(hb + "v", {m, hd}, scl, rng));
    }
    b.attn_w = params.create(base + "attn_out/w", {m, m}, scl, rng);
    b.attn_b = params.create(base + "attn_out/b", {m}, scl, rng);
    b.ln1_g = params.create_const(base + "ln1/g", {m}, 1.0);
    b.ln1_b = params.create_const(base + "ln1/b", {m}, 0.0);
    b.ffn_w1 = params.create(base + "ffn/w1", {m, cfg_.ffn_dim}, scl, rng);
    b.ffn_b1 = params.create(base + "ffn/b1", {cfg_.ffn_dim}, scl, rng);
    Real scl2 = 1.0 / std::sqrt(static_cast<Real>(cfg_.ffn_dim));
    b.ffn_w2 = params.create(base + "ffn/w2", {cfg_.ffn_dim, m}, scl2, rng);
    b.ffn_b2 = params.create(base + "ffn/b2", {m}, scl2, rng);
    b.ln2_g = params.create_const(base + "ln2/g", {m}, 1.0);
    b.ln2_b = params.create_const(base + "ln2/b", {m}, 0.0);
    blocks_.push_back(std::move(b));
  }
  Real scl = 1.0 / std::sqrt(static_cast<Real>(m));
  head_w_ = params.create("acoustic/head/w", {m, cfg_.embed_dim}, scl, rng);
  head_b_ = params.create("acoustic/head/b", {cfg_.embed_dim}, scl, rng);
}

namespace {

// Inverted dropout as a local custom op; rate 0 never reaches here.
Var dropout_op(const Var& x, Real rate, Rng& rng) {
  std::vector<uint8_t> keep(x->size());
  Real inv = 1.0 / (1.0 - rate);
  std::vector<Real> value(x->size());
  for (int64_t i = 0; i < x->size(); ++i) {
    keep[i] = rng.uniform() >= rate;
    value[i] = keep[i] ? x->value[i] * inv : 0.0;
  }
  return make_op(x->shape, std::move(value), {x},
                 [keep, inv](Node& self) {
                   Node& nx = *self.parents[0];
                   if (!nx.requires_grad) return;
                   nx.ensure_grad();
                   for (size_t i = 0; i < keep.size(); ++i)
                     if (keep[i]) nx.grad[i] += self.grad[i] * inv;
                 });
}

}  // namespace

Var AcousticEncoder::attention_matrix(const Var& h, int block,
                                      int head) const {
  const Block& b = blocks_.at(block);
  const int hd = cfg_.model_dim / cfg_.heads;
  Var q = matmul(h, b.q.at(head));
  Var k = matmul(h, b.k.at(head));
  Var scores = scale(matmul(q, k, /*transpose_b=*/true),
                     1.0 / std::sqrt(static_cast<Real>(hd)));
  return softmax_rows(scores);
}

Var AcousticEncoder::self_attention_block(const Var& h, int block,
                                          Rng* dropout_rng) const {
  const Block& b = blocks_.at(block);
  const int hd = cfg_.model_dim / cfg_.heads;
  std::vector<Var> head_outs;
  for (int hh = 0; hh < cfg_.heads; ++hh) {
    Var q = matmul(h, b.q[hh]);
    Var k = matmul(h, b.k[hh]);
    Var v = matmul(h, b.v[hh]);
    Var probs = softmax_rows(scale(matmul(q, k, /*transpose_b=*/true),
                                   1.0 / std::sqrt(static_cast<Real>(hd))));
    head_outs.push_back(matmul(probs, v));
  }
  Var sa = linear(cfg_.heads == 1 ? head_outs[0] : concat_cols(head_outs),
                  b.attn_w, b.attn_b);
  if (dropout_rng && cfg_.dropout > 0)
    sa = dropout_op(sa, cfg_.dropout, *dropout_rng);
  Var z = layernorm(add(sa, h), b.ln1_g, b.ln1_b);
  Var ffn = linear(relu(linear(z, b.ffn_w1, b.ffn_b1)), b.ffn_w2, b.ffn_b2);
  return layernorm(add(ffn, z), b.ln2_g, b.ln2_b);
}

Var AcousticEncoder::encode_hidden(const FeatureSequence& feats,
                                   Rng* dropout_rng) const {
  L2W_CHECK(feats.dim == cfg_.feature_dim,
            "acoustic: feature dim " << feats.dim << " != configured "
                                     << cfg_.feature_dim);
  L2W_CHECK(feats.frames >= min_input_length(),
            "acoustic: input has " << feats.frames
                                   << " frames; minimum is "
                                   << min_input_length());
  Var h = constant({feats.frames, feats.dim}, feats.values);
  for (size_t l = 0; l < conv_w_.size(); ++l)
    h = glu(conv1d(h, conv_w_[l], conv_b_[l], cfg_.frontend[l].stride,
                   /*pad=*/(cfg_.kernel - 1) / 2));
  for (int i = 0; i < cfg_.blocks; ++i) {
    if (dropout_rng && cfg_.layer_drop > 0 &&
        dropout_rng->uniform() < cfg_.layer_drop)
      continue;  // layer drop skips the whole block during training
    h = self_attention_block(h, i, dropout_rng);
  }
  return h;
}

Var AcousticEncoder::encode(const FeatureSequence& feats,
                            Rng* dropout_rng) const {
  Var hidden = encode_hidden(feats, dropout_rng);
  return project_l2ball_rows(linear(hidden, head_w_, head_b_), cfg_.rho);
}

// ---- feature / manifest IO ----

void write_features(const std::string& path, const FeatureSequence& f) {
  L2W_CHECK(f.frames >= 1 && f.dim >= 1, "write_features: empty sequence");
  L2W_CHECK(static_cast<int64_t>(f.values.size()) ==
                static_cast<int64_t>(f.frames) * f.dim,
            "write_features: value count mismatch");
  std::ofstream os(path, std::ios::binary);
  L2W_CHECK(os.good(), "write_features: cannot open " << path);
  uint32_t t = f.frames, d = f.dim;
  os.write(reinterpret_cast<const char*>(&t), 4);
  os.write(reinterpret_cast<const char*>(&d), 4);
  std::vector<float> buf(f.values.begin(), f.values.end());
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
  L2W_CHECK(os.good(), "write_features: write failed for " << path);
}

FeatureSequence read_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  L2W_CHECK(is.good(), "read_features: cannot open " << path);
  uint32_t t = 0, d = 0;
  is.read(reinterpret_cast<char*>(&t), 4);
  is.read(reinterpret_cast<char*>(&d), 4);
  L2W_CHECK(is.good() && t >= 1 && d >= 1,
            "read_features: bad header in " << path);
  FeatureSequence f;
  f.frames = static_cast<int>(t);
  f.dim = static_cast<int>(d);
  std::vector<float> buf(static_cast<size_t>(t) * d);
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  L2W_CHECK(is.good(), "read_features: truncated file " << path);
  f.values.assign(buf.begin(), buf.end());
  for (Real v : f.values)
    L2W_CHECK(std::isfinite(v), "read_features: non-finite value in " << path);
  return f;
}

void write_manifest(const std::string& path,
                    const std::vector<ManifestEntry>& entries) {
  std::ofstream os(path);
  L2W_CHECK(os.good(), "write_manifest: cannot open " << path);
  for (const auto& e : entries)
    os << e.utt_id << "\t" << e.feature_path << "\t" << join_words(e.words)
       << "\n";
  L2W_CHECK(os.good(), "write_manifest: write failed for " << path);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream is(path);
  L2W_CHECK(is.good(), "read_manifest: cannot open " << path);
  std::filesystem::path dir = std::filesystem::path(path).parent_path();
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab1 = line.find('\t');
    auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    L2W_CHECK(tab2 != std::string::npos,
              "read_manifest: " << path << ":" << lineno
                                << ": expected utt-id\\tpath\\ttranscript");
    ManifestEntry e;
    e.utt_id = line.substr(0, tab1);
    e.feature_path = line.substr(tab1 + 1, tab2 - tab1 - 1);
    e.words = split_ws(line.substr(tab2 + 1));
    std::filesystem::path fp(e.feature_path);
    if (fp.is_relative()) e.feature_path = (dir / fp).string();
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace l2w
