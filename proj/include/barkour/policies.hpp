#pragma once

#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "barkour/nn.hpp"
#include "barkour/rewards.hpp"
#include "barkour/sensing.hpp"

namespace barkour {

// ---------------------------------------------------------------------------
// Specialist policy: separate actor/critic MLPs (1024/512/256/128, ELU) with
// a state-independent learned log-std head.
// ---------------------------------------------------------------------------

template <typename T>
struct MlpNetT {
  std::vector<nn::TensorRefT<T>> w, b;

  static MlpNetT create(int in, const std::vector<int>& hidden, int out, Rng& rng,
                        T head_scale) {
    MlpNetT net;
    int prev = in;
    for (int hdim : hidden) {
      auto wt = nn::make_tensor<T>({prev, hdim}, true);
      nn::init_kaiming(*wt, prev, rng);
      net.w.push_back(wt);
      net.b.push_back(nn::make_tensor<T>({hdim}, true));
      prev = hdim;
    }
    auto head = nn::make_tensor<T>({prev, out}, true);
    nn::init_normal(*head, head_scale, rng);
    net.w.push_back(head);
    net.b.push_back(nn::make_tensor<T>({out}, true));
    return net;
  }

  /// Hidden layers followed by ELU, linear output head.
  nn::TensorRefT<T> forward(nn::TapeT<T>& tape, nn::TensorRefT<T> x) const {
    auto h = x;
    for (size_t i = 0; i + 1 < w.size(); ++i) h = tape.elu(tape.linear(h, w[i], b[i]));
    return tape.linear(h, w.back(), b.back());
  }

  std::vector<nn::TensorRefT<T>> tensors() const {
    std::vector<nn::TensorRefT<T>> out;
    for (size_t i = 0; i < w.size(); ++i) {
      out.push_back(w[i]);
      out.push_back(b[i]);
    }
    return out;
  }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& t : tensors()) n += t->size();
    return n;
  }
};

using MlpNet = MlpNetT<float>;

struct SpecialistConfig {
  int obs_dim = 0;
  std::vector<int> hidden = {1024, 512, 256, 128};
  int action_dim = kActionDim;
  double log_std_init = -1.0;
};

struct SpecialistPolicy {
  SpecialistConfig cfg;
  MlpNet actor, critic;
  nn::TensorRef log_std;

  static SpecialistPolicy create(const SpecialistConfig& cfg, uint64_t seed);

  /// Deterministic mean action (or a Gaussian sample), clipped to [-1, 1].
  Vec12 act(std::span<const double> obs, bool stochastic, Rng& rng) const;

  nn::TensorRef obs_batch(std::span<const double> flat, int batch) const;
  nn::ParamMap params() const;
  std::string arch_json() const;
  void save(const std::string& dir, int64_t step) const;
  static SpecialistPolicy load(const std::string& dir);

  /// Closed-form parameter count for one MLP of this shape.
  static int64_t mlp_param_count(int obs_dim, const std::vector<int>& hidden, int out);
};

// ---------------------------------------------------------------------------
// Locomotion-Transformer: per-map conv tokenizers, 256-d proprio/action
// tokens, learned positional embeddings, a 2-layer causal transformer, and
// an action head read at the final position.
// ---------------------------------------------------------------------------

struct LocoTransformerConfig {
  int d_model = 256;
  int layers = 2;
  int heads = 4;
  int context = 15;  // W control steps
  int mlp_mult = 4;
  int conv_channels = 8;
  int map_embed = 64;
  std::vector<HeightfieldSpec> maps = {HeightfieldSpec::centered_grid(),
                                       HeightfieldSpec::forward_strip()};
  int proprio_cmd_dim = kProprioDim + kCommandDim;  // 19
  int action_dim = kActionDim;
  std::string input_mode = "command";  // "command" or "pose" (course-specific)

  int max_tokens() const { return 2 * context + 1; }
  std::string to_json() const;
  static LocoTransformerConfig from_json(const std::string& json);
};

/// One control step of transformer input: the previous action (absent at the
/// episode start) followed by the proprio+command vector.
struct WindowStep {
  std::vector<double> proprio_cmd;           // [19]
  std::optional<std::vector<double>> prev_action;  // [12]
};

/// Rolling token window: at most `context` steps plus the current
/// heightfields. Sequence = interleaved {.., s^p_k, a_k, ..} ending with
/// {s^p_t, s^v_t}; at capacity that is 2W+1 = 31 tokens.
class TokenWindow {
 public:
  explicit TokenWindow(int context = 15) : context_(context) {}

  void clear() {
    steps_.clear();
    maps_.clear();
  }
  /// Pushes the current step (proprio+command and the action taken at the
  /// previous step) plus the freshly sampled heightfields.
  void push(std::vector<double> proprio_cmd, const Vec12* prev_action,
            std::vector<std::vector<double>> heightfields);

  int num_steps() const { return static_cast<int>(steps_.size()); }
  int num_tokens() const;
  const std::deque<WindowStep>& steps() const { return steps_; }
  const std::vector<std::vector<double>>& heightfields() const { return maps_; }

 private:
  int context_;
  std::deque<WindowStep> steps_;
  std::vector<std::vector<double>> maps_;
};

template <typename T>
struct ConvTokenizerT {
  nn::TensorRefT<T> w1, b1, w2, b2;  // 1->C, C->C, kernel 3, stride 1
  nn::TensorRefT<T> proj_w, proj_b;  // flatten -> map_embed
};

template <typename T>
struct TransformerBlockT {
  nn::TensorRefT<T> ln1_g, ln1_b, qkv_w, qkv_b, attn_w, attn_b;
  nn::TensorRefT<T> ln2_g, ln2_b, fc_w, fc_b, proj_w, proj_b;
};

/// Batched window input prepared for the graph builder.
template <typename T>
struct WindowBatchT {
  int batch = 0;
  // Per-map conv inputs [B, 1, H, W].
  std::vector<nn::TensorRefT<T>> map_inputs;
  // All proprio tokens [Np, 19] and action tokens [Na, 12] across the batch.
  nn::TensorRefT<T> proprio_rows, action_rows;
  // Flat gather indices per (window, slot) into the stacked token matrix,
  // with the zero row for padding; plus each window's readout slot.
  std::vector<int> gather;      // batch * max_tokens
  std::vector<int> positions;   // same layout: position embedding index
  std::vector<int> readout;     // batch entries: slot of the final token
};

template <typename T>
struct LocoTransformerNetT {
  LocoTransformerConfig cfg;
  std::vector<ConvTokenizerT<T>> encoders;
  nn::TensorRefT<T> map_join_w, map_join_b;
  nn::TensorRefT<T> proprio_w, proprio_b;
  nn::TensorRefT<T> action_w, action_b;
  nn::TensorRefT<T> pos_emb;  // [max_tokens, d_model]
  std::vector<TransformerBlockT<T>> blocks;
  nn::TensorRefT<T> final_ln_g, final_ln_b, head_w, head_b;

  static LocoTransformerNetT create(const LocoTransformerConfig& cfg, uint64_t seed);
  /// Actions predicted at each window's final position: [B, action_dim].
  nn::TensorRefT<T> forward(nn::TapeT<T>& tape, const WindowBatchT<T>& batch) const;
  std::vector<std::pair<std::string, nn::TensorRefT<T>>> named_tensors() const;
  std::vector<nn::TensorRefT<T>> tensors() const;
  int64_t param_count() const;
};

using LocoTransformerNet = LocoTransformerNetT<float>;

struct LocoTransformer {
  LocoTransformerNet net;

  static LocoTransformer create(const LocoTransformerConfig& cfg, uint64_t seed);
  Vec12 act(const TokenWindow& window) const;
  nn::ParamMap params() const;
  void save(const std::string& dir, int64_t step) const;
  static LocoTransformer load(const std::string& dir);
  const LocoTransformerConfig& config() const { return net.cfg; }
};

/// Builds the batched input tensors from token windows.
template <typename T>
WindowBatchT<T> make_window_batch(const LocoTransformerConfig& cfg,
                                  const std::vector<const TokenWindow*>& windows);

/// q_default + action_scale * action, clamped to the joint limits.
Vec12 action_to_targets(const Vec12& action, const RobotModel& model);

}  // namespace barkour
