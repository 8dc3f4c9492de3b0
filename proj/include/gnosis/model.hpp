// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// The correctness probe: hidden circuit, attention circuit and gated fusion
// head over one flat ParamStore.
//
// Hidden circuit
//   pool S -> K_hid rows, project D -> d_tok
//   Phase 1: sum of depthwise dilated conv1d branches, squeeze-excite gate,
//            residual
//   Phase 2: n_sab SABs, PMA with learned seeds, flatten, linear -> D_HID
// Attention circuit (one row per map, rows ordered layer-major)
//   per map: [shared stride-2 CNN + global pool ; 16 statistics]
//   linear -> d_attn_model, + layer and head embeddings
//   axial blocks: head-axis mixing (per-map term + mean over the layer's
//   heads, so head order does not matter), then a kernel-3 conv along the
//   layer axis; each is a pre-LN gated (GLU) residual followed by a
//   feed-forward residual
//   PMA with learned seeds, flatten, linear -> D_ATT
// Fusion
//   gate = sigmoid(W_g z + b_g), value = gelu(W_v z + b_v),
//   p = sigmoid(w_o . (gate * value) + b_o)

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gnosis/ad/grad_check.hpp"
#include "gnosis/ad/ops.hpp"
#include "gnosis/ad/params.hpp"
#include "gnosis/model_config.hpp"
#include "gnosis/trace_store.hpp"

namespace gnosis::model {

// Trace geometry the model is built for. The map grid is the model's k,
// traces with another grid are re-pooled.
struct ModelGeometry {
  std::size_t hidden_dim = 0;
  std::size_t num_layers = 0;
  std::size_t num_heads = 0;

  static ModelGeometry of(const trace::Geometry& g) { return {g.hidden_dim, g.num_layers, g.num_heads}; }
  bool operator==(const ModelGeometry&) const = default;
  nlohmann::json to_json() const;
  static ModelGeometry from_json(const nlohmann::json& j);
};

// Model inputs after compression. Everything downstream of this is
// independent of the original sequence length.
struct PreparedTrace {
  std::vector<float> hidden;  // [k_hid x hidden_dim]
  std::vector<float> maps;    // [L*H x k x k], unit mass
  std::vector<float> stats;   // [L*H x 16]
};

struct ParamCount {
  std::size_t hidden = 0;
  std::size_t attn = 0;
  std::size_t fusion = 0;
  std::size_t total = 0;
};

template <class T>
struct ForwardResult {
  ad::Tensor<T> z_hid;
  ad::Tensor<T> z_attn;
  ad::Tensor<T> prob;  // shape [1]
};

template <class T>
class GnosisModel {
 public:
  GnosisModel(ModelConfig cfg, ModelGeometry geometry, uint64_t seed = 0);

  const ModelConfig& config() const noexcept { return cfg_; }
  const ModelGeometry& geometry() const noexcept { return geo_; }
  ad::ParamStore<T>& params() noexcept { return store_; }
  const ad::ParamStore<T>& params() const noexcept { return store_; }

  // Compression front end. Checks geometry (ConfigError naming the field).
  PreparedTrace prepare(const trace::GenerationTrace& t) const;

  // hidden: [k_hid x D] -> [d_hid]
  ad::Tensor<T> encode_hidden(ad::Tape<T>& tape, ad::Tensor<T> hidden) const;
  // maps: [L*H x k x k], stats: [L*H x 16] (constant) -> [d_att]
  ad::Tensor<T> encode_attention(ad::Tape<T>& tape, ad::Tensor<T> maps, ad::Tensor<T> stats) const;
  // -> [1]
  ad::Tensor<T> fuse_and_score(ad::Tape<T>& tape, ad::Tensor<T> z_hid, ad::Tensor<T> z_attn) const;

  ForwardResult<T> forward(ad::Tape<T>& tape, const PreparedTrace& x) const;

  double score(const PreparedTrace& x) const;
  double score(const trace::GenerationTrace& t) const { return score(prepare(t)); }

  ParamCount param_count() const;
  // 1 for entries the optimizer may update under the configured ablation.
  std::vector<uint8_t> trainable_mask() const;

 private:
  struct Linear {
    std::size_t w, b;
  };
  struct LayerNorm {
    std::size_t g, b;
  };
  struct Mab {
    Linear q, k, v, o;
    LayerNorm ln1, ln2;
    Linear ff1, ff2;
    std::size_t heads;
  };
  struct AxialSub {
    LayerNorm ln1, ln2;
    std::size_t w_self, w_ctx, w_conv, b_mix;  // head axis uses self/ctx, layer axis uses conv
    Linear ff1, ff2;
    bool head_axis;
  };

  Linear add_linear(const std::string& name, std::size_t in, std::size_t out, ad::ParamGroup g);
  LayerNorm add_ln(const std::string& name, std::size_t dim, ad::ParamGroup g);
  Mab add_mab(const std::string& name, std::size_t dim, std::size_t heads, ad::ParamGroup g);

  ad::Tensor<T> lin(ad::Tape<T>& tape, ad::Tensor<T> x, const Linear& l) const;
  ad::Tensor<T> ln(ad::Tape<T>& tape, ad::Tensor<T> x, const LayerNorm& l) const;
  ad::Tensor<T> mab(ad::Tape<T>& tape, ad::Tensor<T> x, ad::Tensor<T> y, const Mab& m) const;
  ad::Tensor<T> axial(ad::Tape<T>& tape, ad::Tensor<T> g, const AxialSub& a) const;
  ad::Tensor<T> prm(ad::Tape<T>& tape, std::size_t index) const { return tape.param(store_, index); }

  ModelConfig cfg_;
  ModelGeometry geo_;
  ad::ParamStore<T> store_;
  std::vector<double> init_;  // per-parameter init scale, used while building

  // hidden circuit
  Linear h_proj_;
  std::vector<Linear> h_branches_;  // w [d_tok x kernel], b [d_tok]
  Linear h_se1_, h_se2_;
  std::vector<Mab> h_sabs_;
  std::size_t h_seeds_ = 0;
  Mab h_pma_;
  Linear h_out_;
  // attention circuit
  std::vector<Linear> a_cnn_;  // w [Cout x Cin x 3 x 3]
  Linear a_proj_;
  std::size_t a_layer_emb_ = 0, a_head_emb_ = 0;
  std::vector<AxialSub> a_axial_;
  std::size_t a_seeds_ = 0;
  Mab a_pma_;
  Linear a_out_;
  // fusion
  Linear f_gate_, f_value_, f_out_;
};

ParamCount param_count(const ModelConfig& cfg, const ModelGeometry& geometry);

// Reference sizes of the full-size preset at hidden width 2048; each count
// should land within kParamBand (relative) of its anchor.
inline constexpr double kHiddenParamAnchor = 2.6e6;
inline constexpr double kAttnParamAnchor = 1.4e6;
inline constexpr double kTotalParamAnchor = 5.0e6;
inline constexpr double kParamBand = 0.25;

// Central differences of BCE(prob, label) against sampled parameter
// coordinates (per_tensor per parameter tensor).
ad::GradCheckReport grad_check_model(GnosisModel<double>& model, const PreparedTrace& x, uint8_t label,
                                     double tolerance, std::size_t per_tensor, uint64_t seed);

extern template class GnosisModel<float>;
extern template class GnosisModel<double>;

}  // namespace gnosis::model
