// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnosis/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "gnosis/attn_stats.hpp"
#include "gnosis/compression.hpp"
#include "gnosis/errors.hpp"

namespace gnosis::model {

using ad::ParamGroup;
using ad::Tape;
using ad::Tensor;

nlohmann::json ModelGeometry::to_json() const {
  return {{"hidden_dim", hidden_dim}, {"num_layers", num_layers}, {"num_heads", num_heads}};
}

ModelGeometry ModelGeometry::from_json(const nlohmann::json& j) {
  try {
    return {j.at("hidden_dim").get<std::size_t>(), j.at("num_layers").get<std::size_t>(),
            j.at("num_heads").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("geometry: ") + e.what());
  }
}

namespace {

// Init kinds recorded per parameter at registration.
constexpr double kZeros = 0.0;
constexpr double kOnes = -1.0;

}  // namespace

template <class T>
typename GnosisModel<T>::Linear GnosisModel<T>::add_linear(const std::string& name, std::size_t in, std::size_t out,
                                                           ParamGroup g) {
  Linear l{store_.add(name + ".w", {in, out}, g), store_.add(name + ".b", {out}, g)};
  init_.push_back(1.0 / std::sqrt(static_cast<double>(in)));
  init_.push_back(kZeros);
  return l;
}

template <class T>
typename GnosisModel<T>::LayerNorm GnosisModel<T>::add_ln(const std::string& name, std::size_t dim, ParamGroup g) {
  LayerNorm l{store_.add(name + ".g", {dim}, g), store_.add(name + ".b", {dim}, g)};
  init_.push_back(kOnes);
  init_.push_back(kZeros);
  return l;
}

template <class T>
typename GnosisModel<T>::Mab GnosisModel<T>::add_mab(const std::string& name, std::size_t dim, std::size_t heads,
                                                     ParamGroup g) {
  Mab m;
  m.q = add_linear(name + ".attn.q", dim, dim, g);
  m.k = add_linear(name + ".attn.k", dim, dim, g);
  m.v = add_linear(name + ".attn.v", dim, dim, g);
  m.o = add_linear(name + ".attn.o", dim, dim, g);
  m.ln1 = add_ln(name + ".ln1", dim, g);
  m.ff1 = add_linear(name + ".ff1", dim, cfg_.ff_mult * dim, g);
  m.ff2 = add_linear(name + ".ff2", cfg_.ff_mult * dim, dim, g);
  m.ln2 = add_ln(name + ".ln2", dim, g);
  m.heads = heads;
  return m;
}

template <class T>
GnosisModel<T>::GnosisModel(ModelConfig cfg, ModelGeometry geometry, uint64_t seed)
    : cfg_(std::move(cfg)), geo_(geometry) {
  cfg_.validate();
  if (geo_.hidden_dim == 0 || geo_.num_layers == 0 || geo_.num_heads == 0) {
    throw ConfigError("model geometry must be positive (hidden_dim, num_layers, num_heads)");
  }
  auto push = [&](std::size_t idx, double s) {
    init_.push_back(s);
    return idx;
  };

  // hidden circuit
  const auto hg = ParamGroup::kHidden;
  const std::size_t dt = cfg_.d_tok;
  h_proj_ = add_linear("hidden.proj", geo_.hidden_dim, dt, hg);
  for (std::size_t i = 0; i < cfg_.dilations.size(); ++i) {
    const std::string n = "hidden.conv.d" + std::to_string(cfg_.dilations[i]);
    Linear br{push(store_.add(n + ".w", {dt, cfg_.conv_kernel}, hg),
                   1.0 / std::sqrt(static_cast<double>(cfg_.conv_kernel * cfg_.dilations.size()))),
              push(store_.add(n + ".b", {dt}, hg), kZeros)};
    h_branches_.push_back(br);
  }
  const std::size_t dse = dt / cfg_.se_reduction;
  h_se1_ = add_linear("hidden.se.fc1", dt, dse, hg);
  h_se2_ = add_linear("hidden.se.fc2", dse, dt, hg);
  for (std::size_t i = 0; i < cfg_.n_sab; ++i) {
    h_sabs_.push_back(add_mab("hidden.sab" + std::to_string(i), dt, cfg_.sab_heads, hg));
  }
  h_seeds_ = push(store_.add("hidden.pma.seeds", {cfg_.pma_seeds_hidden, dt}, hg), 1.0);
  h_pma_ = add_mab("hidden.pma", dt, cfg_.sab_heads, hg);
  h_out_ = add_linear("hidden.out", cfg_.pma_seeds_hidden * dt, cfg_.d_hid, hg);

  // attention circuit
  const auto ag = ParamGroup::kAttention;
  const std::size_t dm = cfg_.d_attn_model;
  std::size_t cin = 1;
  for (std::size_t i = 0; i < cfg_.cnn_channels.size(); ++i) {
    const std::size_t co = cfg_.cnn_channels[i];
    const std::string n = "attn.cnn" + std::to_string(i);
    Linear c{push(store_.add(n + ".w", {co, cin, 3, 3}, ag), std::sqrt(2.0 / static_cast<double>(cin * 9))),
             push(store_.add(n + ".b", {co}, ag), kZeros)};
    a_cnn_.push_back(c);
    cin = co;
  }
  a_proj_ = add_linear("attn.proj", cfg_.d_grid(), dm, ag);
  a_layer_emb_ = push(store_.add("attn.layer_emb", {geo_.num_layers, dm}, ag), 0.1);
  a_head_emb_ = push(store_.add("attn.head_emb", {geo_.num_heads, dm}, ag), 0.1);
  for (std::size_t i = 0; i < cfg_.axial_blocks; ++i) {
    for (int axis = 0; axis < 2; ++axis) {
      const bool head = axis == 0;
      const std::string n = "attn.axial" + std::to_string(i) + (head ? ".head" : ".layer");
      AxialSub a{};
      a.head_axis = head;
      a.ln1 = add_ln(n + ".ln1", dm, ag);
      if (head) {
        const double s = 1.0 / std::sqrt(2.0 * static_cast<double>(dm));
        a.w_self = push(store_.add(n + ".mix.w_self", {dm, 2 * dm}, ag), s);
        a.w_ctx = push(store_.add(n + ".mix.w_ctx", {dm, 2 * dm}, ag), s);
      } else {
        const double s = 1.0 / std::sqrt(static_cast<double>(dm * cfg_.conv_kernel));
        a.w_conv = push(store_.add(n + ".mix.w", {2 * dm, dm, cfg_.conv_kernel, 1}, ag), s);
      }
      a.b_mix = push(store_.add(n + ".mix.b", {2 * dm}, ag), kZeros);
      a.ln2 = add_ln(n + ".ln2", dm, ag);
      a.ff1 = add_linear(n + ".ff1", dm, cfg_.ff_mult * dm, ag);
      a.ff2 = add_linear(n + ".ff2", cfg_.ff_mult * dm, dm, ag);
      a_axial_.push_back(a);
    }
  }
  a_seeds_ = push(store_.add("attn.pma.seeds", {cfg_.pma_seeds_attn, dm}, ag), 1.0);
  a_pma_ = add_mab("attn.pma", dm, cfg_.attn_heads, ag);
  a_out_ = add_linear("attn.out", cfg_.pma_seeds_attn * dm, cfg_.d_att, ag);

  // fusion head
  const auto fg = ParamGroup::kFusion;
  const std::size_t dz = cfg_.d_hid + cfg_.d_att;
  f_gate_ = add_linear("fusion.gate", dz, cfg_.fusion_hidden, fg);
  f_value_ = add_linear("fusion.value", dz, cfg_.fusion_hidden, fg);
  f_out_ = add_linear("fusion.out", cfg_.fusion_hidden, 1, fg);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < store_.count(); ++i) {
    auto v = store_.values(i);
    const double s = init_[i];
    for (auto& x : v) x = s == kOnes ? T(1) : (s == kZeros ? T(0) : static_cast<T>(s * normal(rng)));
  }
}

// ---------------------------------------------------------------------------

template <class T>
PreparedTrace GnosisModel<T>::prepare(const trace::GenerationTrace& t) const {
  const auto& h = t.header;
  auto mismatch = [](const char* field, std::size_t got, std::size_t want) {
    return ConfigError(std::string(field) + ": trace has " + std::to_string(got) + ", model expects " +
                       std::to_string(want));
  };
  if (h.hidden_dim != geo_.hidden_dim) throw mismatch("hidden_dim", h.hidden_dim, geo_.hidden_dim);
  if (h.num_layers != geo_.num_layers) throw mismatch("num_layers", h.num_layers, geo_.num_layers);
  if (h.num_heads != geo_.num_heads) throw mismatch("num_heads", h.num_heads, geo_.num_heads);
  if (t.hidden.size() != h.hidden_count() || t.attention.size() != h.attention_count()) {
    throw ShapeError("trace payload does not match its header");
  }

  PreparedTrace out;
  const std::size_t dim = h.hidden_dim;
  const std::size_t skip = cfg_.mask_prompt ? h.prompt_len : 0;
  const std::size_t rows = h.seq_len - skip;
  if (rows == 0) throw DomainError("trace has no response tokens to pool");
  const auto pooled = compress::pool_hidden(std::span<const float>(t.hidden).subspan(skip * dim, rows * dim), rows,
                                            dim, {cfg_.k_hid, cfg_.hidden_mode});
  out.hidden.assign(pooled.data.begin(), pooled.data.end());

  const std::size_t k = cfg_.k;
  const std::size_t nmaps = h.num_maps();
  if (h.grid == k) {
    out.maps = t.attention;
  } else {
    out.maps.resize(nmaps * k * k);
    const std::size_t g = h.grid;
    for (std::size_t m = 0; m < nmaps; ++m) {
      MatrixD src(g, g);
      for (std::size_t i = 0; i < g * g; ++i) src.data[i] = t.attention[m * g * g + i];
      const auto dst = compress::pool_attention(src, {k, true});
      for (std::size_t i = 0; i < k * k; ++i) out.maps[m * k * k + i] = static_cast<float>(dst.data[i]);
    }
  }
  const auto st = stats::stat_features_batch(out.maps, nmaps, k, h.num_heads);
  out.stats.assign(st.data.begin(), st.data.end());
  return out;
}

template <class T>
Tensor<T> GnosisModel<T>::lin(Tape<T>& tape, Tensor<T> x, const Linear& l) const {
  return ad::linear(x, prm(tape, l.w), prm(tape, l.b));
}

template <class T>
Tensor<T> GnosisModel<T>::ln(Tape<T>& tape, Tensor<T> x, const LayerNorm& l) const {
  return ad::layer_norm(x, prm(tape, l.g), prm(tape, l.b));
}

template <class T>
Tensor<T> GnosisModel<T>::mab(Tape<T>& tape, Tensor<T> x, Tensor<T> y, const Mab& m) const {
  auto q = lin(tape, x, m.q);
  auto k = lin(tape, y, m.k);
  auto v = lin(tape, y, m.v);
  auto a = lin(tape, ad::multihead_attention(q, k, v, m.heads), m.o);
  auto h = ln(tape, ad::add(x, a), m.ln1);
  auto f = lin(tape, ad::gelu(lin(tape, h, m.ff1)), m.ff2);
  return ln(tape, ad::add(h, f), m.ln2);
}

template <class T>
Tensor<T> GnosisModel<T>::encode_hidden(Tape<T>& tape, Tensor<T> hidden) const {
  if (hidden.rank() != 2 || hidden.dim(0) != cfg_.k_hid || hidden.dim(1) != geo_.hidden_dim) {
    throw ShapeError("encode_hidden: got " + ad::to_string(hidden.shape()) + ", expected [" +
                     std::to_string(cfg_.k_hid) + ", " + std::to_string(geo_.hidden_dim) + "]");
  }
  auto h = lin(tape, hidden, h_proj_);

  Tensor<T> mixed;
  for (std::size_t i = 0; i < h_branches_.size(); ++i) {
    auto b = ad::depthwise_conv1d(h, prm(tape, h_branches_[i].w), prm(tape, h_branches_[i].b), cfg_.dilations[i]);
    mixed = i == 0 ? b : ad::add(mixed, b);
  }
  auto squeeze = ad::mean_rows(mixed);
  auto gate = ad::sigmoid(lin(tape, ad::gelu(lin(tape, squeeze, h_se1_)), h_se2_));
  h = ad::add(h, ad::mul(mixed, gate));

  for (const auto& sab : h_sabs_) h = mab(tape, h, h, sab);
  auto pooled = mab(tape, prm(tape, h_seeds_), h, h_pma_);
  return lin(tape, ad::reshape(pooled, {pooled.numel()}), h_out_);
}

template <class T>
Tensor<T> GnosisModel<T>::axial(Tape<T>& tape, Tensor<T> g, const AxialSub& a) const {
  const std::size_t L = geo_.num_layers, H = geo_.num_heads, N = L * H, C = cfg_.d_attn_model;
  auto n = ln(tape, g, a.ln1);
  Tensor<T> u;
  if (a.head_axis) {
    std::vector<T> avg(N * N, T(0));
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < H; ++j) avg[(l * H + i) * N + l * H + j] = T(1) / static_cast<T>(H);
      }
    }
    auto ctx = ad::matmul(tape.constant({N, N}, std::move(avg)), n);
    u = ad::add(ad::add(ad::matmul(n, prm(tape, a.w_self)), ad::matmul(ctx, prm(tape, a.w_ctx))), prm(tape, a.b_mix));
  } else {
    auto img = ad::reshape(ad::transpose2d(n), {1, C, L, H});
    ad::Conv2dSpec spec{1, 1, cfg_.conv_kernel / 2, 0};
    auto c = ad::conv2d(img, prm(tape, a.w_conv), prm(tape, a.b_mix), spec);
    u = ad::transpose2d(ad::reshape(c, {2 * C, N}));
  }
  auto glu = ad::mul(ad::slice(u, 1, 0, C), ad::sigmoid(ad::slice(u, 1, C, 2 * C)));
  g = ad::add(g, glu);
  auto f = lin(tape, ad::gelu(lin(tape, ln(tape, g, a.ln2), a.ff1)), a.ff2);
  return ad::add(g, f);
}

template <class T>
Tensor<T> GnosisModel<T>::encode_attention(Tape<T>& tape, Tensor<T> maps, Tensor<T> stats_in) const {
  const std::size_t L = geo_.num_layers, H = geo_.num_heads, N = L * H, k = cfg_.k;
  if (maps.numel() != N * k * k) {
    throw ConfigError("encode_attention: maps " + ad::to_string(maps.shape()) + " do not match the model's (L_sel=" +
                      std::to_string(L) + ", H=" + std::to_string(H) + ", k=" + std::to_string(k) + ")");
  }
  if (stats_in.numel() != N * cfg_.d_stat) {
    throw ShapeError("encode_attention: statistics " + ad::to_string(stats_in.shape()) + ", expected [" +
                     std::to_string(N) + ", 16]");
  }
  const std::size_t c_last = cfg_.cnn_channels.back();
  Tensor<T> feat;
  if (cfg_.ablation == Ablation::kAttnStatsOnly) {
    feat = tape.zeros({N, c_last});
  } else {
    auto c = ad::reshape(maps, {N, 1, k, k});
    for (const auto& conv : a_cnn_) c = ad::gelu(ad::conv2d(c, prm(tape, conv.w), prm(tape, conv.b), {2, 2, 1, 1}));
    feat = ad::global_avg_pool(c);
  }
  auto st = cfg_.ablation == Ablation::kAttnCnnOnly ? tape.zeros({N, cfg_.d_stat}) : ad::reshape(stats_in, {N, cfg_.d_stat});
  auto g = lin(tape, ad::concat<T>({feat, st}, 1), a_proj_);
  g = ad::add(g, ad::repeat_rows(prm(tape, a_layer_emb_), H));
  g = ad::add(g, ad::tile_rows(prm(tape, a_head_emb_), L));
  for (const auto& a : a_axial_) g = axial(tape, g, a);
  auto pooled = mab(tape, prm(tape, a_seeds_), g, a_pma_);
  return lin(tape, ad::reshape(pooled, {pooled.numel()}), a_out_);
}

template <class T>
Tensor<T> GnosisModel<T>::fuse_and_score(Tape<T>& tape, Tensor<T> z_hid, Tensor<T> z_attn) const {
  if (z_hid.shape() != ad::Shape{cfg_.d_hid}) {
    throw ShapeError("fuse_and_score: z_hid " + ad::to_string(z_hid.shape()) + ", expected [" +
                     std::to_string(cfg_.d_hid) + "]");
  }
  if (z_attn.shape() != ad::Shape{cfg_.d_att}) {
    throw ShapeError("fuse_and_score: z_attn " + ad::to_string(z_attn.shape()) + ", expected [" +
                     std::to_string(cfg_.d_att) + "]");
  }
  auto z = ad::concat<T>({z_hid, z_attn}, 0);
  auto gate = ad::sigmoid(lin(tape, z, f_gate_));
  auto value = ad::gelu(lin(tape, z, f_value_));
  return ad::sigmoid(lin(tape, ad::mul(gate, value), f_out_));
}

template <class T>
ForwardResult<T> GnosisModel<T>::forward(Tape<T>& tape, const PreparedTrace& x) const {
  const std::size_t N = geo_.num_layers * geo_.num_heads;
  ForwardResult<T> r;
  if (cfg_.ablation == Ablation::kFull || cfg_.ablation == Ablation::kHiddenOnly) {
    auto hidden = tape.constant({cfg_.k_hid, geo_.hidden_dim}, std::vector<T>(x.hidden.begin(), x.hidden.end()));
    r.z_hid = encode_hidden(tape, hidden);
  } else {
    r.z_hid = tape.zeros({cfg_.d_hid});
  }
  if (cfg_.ablation != Ablation::kHiddenOnly) {
    auto maps = tape.constant({N, cfg_.k, cfg_.k}, std::vector<T>(x.maps.begin(), x.maps.end()));
    auto st = tape.constant({N, cfg_.d_stat}, std::vector<T>(x.stats.begin(), x.stats.end()));
    r.z_attn = encode_attention(tape, maps, st);
  } else {
    r.z_attn = tape.zeros({cfg_.d_att});
  }
  r.prob = fuse_and_score(tape, r.z_hid, r.z_attn);
  return r;
}

template <class T>
double GnosisModel<T>::score(const PreparedTrace& x) const {
  Tape<T> tape;
  return static_cast<double>(forward(tape, x).prob.item());
}

template <class T>
ParamCount GnosisModel<T>::param_count() const {
  ParamCount c;
  c.hidden = store_.group_size(ParamGroup::kHidden);
  c.attn = store_.group_size(ParamGroup::kAttention);
  c.fusion = store_.group_size(ParamGroup::kFusion);
  c.total = store_.total_size();
  return c;
}

template <class T>
std::vector<uint8_t> GnosisModel<T>::trainable_mask() const {
  std::vector<ParamGroup> groups{ParamGroup::kFusion};
  if (cfg_.ablation == Ablation::kFull || cfg_.ablation == Ablation::kHiddenOnly) groups.push_back(ParamGroup::kHidden);
  if (cfg_.ablation != Ablation::kHiddenOnly) groups.push_back(ParamGroup::kAttention);
  auto mask = store_.group_mask(groups);
  if (cfg_.ablation == Ablation::kAttnStatsOnly) {
    for (const auto& conv : a_cnn_) {
      for (std::size_t idx : {conv.w, conv.b}) {
        const auto& info = store_.info(idx);
        std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(info.offset), info.size, uint8_t{0});
      }
    }
  }
  return mask;
}

ParamCount param_count(const ModelConfig& cfg, const ModelGeometry& geometry) {
  return GnosisModel<float>(cfg, geometry, 0).param_count();
}

ad::GradCheckReport grad_check_model(GnosisModel<double>& model, const PreparedTrace& x, uint8_t label,
                                     double tolerance, std::size_t per_tensor, uint64_t seed) {
  const double y = label;
  auto loss = [&](Tape<double>& tape) {
    return ad::binary_cross_entropy(model.forward(tape, x).prob, std::span<const double>(&y, 1));
  };
  return ad::grad_check_params(model.params(), loss, tolerance, per_tensor, seed);
}

template class GnosisModel<float>;
template class GnosisModel<double>;

}  // namespace gnosis::model
