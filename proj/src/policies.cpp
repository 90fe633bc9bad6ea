#include "barkour/policies.hpp"

#include <nlohmann/json.hpp>

namespace barkour {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Specialist
// ---------------------------------------------------------------------------

SpecialistPolicy SpecialistPolicy::create(const SpecialistConfig& cfg, uint64_t seed) {
  if (cfg.obs_dim <= 0) throw std::invalid_argument("specialist needs a positive obs_dim");
  SpecialistPolicy p;
  p.cfg = cfg;
  Rng actor_rng = Rng::substream(seed, "specialist.actor");
  Rng critic_rng = Rng::substream(seed, "specialist.critic");
  p.actor = MlpNet::create(cfg.obs_dim, cfg.hidden, cfg.action_dim, actor_rng, 0.01f);
  p.critic = MlpNet::create(cfg.obs_dim, cfg.hidden, 1, critic_rng, 0.1f);
  p.log_std = nn::full<float>({cfg.action_dim}, static_cast<float>(cfg.log_std_init), true);
  return p;
}

nn::TensorRef SpecialistPolicy::obs_batch(std::span<const double> flat, int batch) const {
  if (static_cast<int>(flat.size()) != batch * cfg.obs_dim)
    throw std::invalid_argument("observation batch width mismatch");
  auto t = nn::make_tensor<float>({batch, cfg.obs_dim});
  for (size_t i = 0; i < flat.size(); ++i) t->val[i] = static_cast<float>(flat[i]);
  return t;
}

Vec12 SpecialistPolicy::act(std::span<const double> obs, bool stochastic, Rng& rng) const {
  nn::Tape tape;
  auto mean = actor.forward(tape, obs_batch(obs, 1));
  Vec12 a;
  for (int j = 0; j < cfg.action_dim; ++j) {
    double v = mean->val[j];
    if (stochastic) v += std::exp(log_std->val[j]) * rng.normal();
    a[j] = clamp(v, -1.0, 1.0);
  }
  return a;
}

nn::ParamMap SpecialistPolicy::params() const {
  nn::ParamMap m;
  for (size_t i = 0; i < actor.w.size(); ++i) {
    m.add("actor.l" + std::to_string(i) + ".w", actor.w[i]);
    m.add("actor.l" + std::to_string(i) + ".b", actor.b[i]);
  }
  for (size_t i = 0; i < critic.w.size(); ++i) {
    m.add("critic.l" + std::to_string(i) + ".w", critic.w[i]);
    m.add("critic.l" + std::to_string(i) + ".b", critic.b[i]);
  }
  m.add("log_std", log_std);
  return m;
}

std::string SpecialistPolicy::arch_json() const {
  json j;
  j["kind"] = "specialist_mlp";
  j["obs_dim"] = cfg.obs_dim;
  j["hidden"] = cfg.hidden;
  j["action_dim"] = cfg.action_dim;
  j["log_std_init"] = cfg.log_std_init;
  return j.dump();
}

void SpecialistPolicy::save(const std::string& dir, int64_t step) const {
  nn::save_checkpoint(dir, params(), step, arch_json());
}

SpecialistPolicy SpecialistPolicy::load(const std::string& dir) {
  const json arch = json::parse(nn::checkpoint_arch(dir));
  if (arch.value("kind", "") != "specialist_mlp")
    throw SchemaError("checkpoint is not a specialist policy: " + dir);
  SpecialistConfig cfg;
  cfg.obs_dim = arch.at("obs_dim").get<int>();
  cfg.hidden = arch.at("hidden").get<std::vector<int>>();
  cfg.action_dim = arch.at("action_dim").get<int>();
  cfg.log_std_init = arch.value("log_std_init", -1.0);
  SpecialistPolicy p = create(cfg, 0);
  nn::ParamMap m = p.params();
  nn::load_checkpoint(dir, m);
  return p;
}

int64_t SpecialistPolicy::mlp_param_count(int obs_dim, const std::vector<int>& hidden,
                                          int out) {
  int64_t n = 0;
  int prev = obs_dim;
  for (int h : hidden) {
    n += static_cast<int64_t>(prev) * h + h;
    prev = h;
  }
  n += static_cast<int64_t>(prev) * out + out;
  return n;
}

// ---------------------------------------------------------------------------
// Token window
// ---------------------------------------------------------------------------

void TokenWindow::push(std::vector<double> proprio_cmd, const Vec12* prev_action,
                       std::vector<std::vector<double>> heightfields) {
  WindowStep s;
  s.proprio_cmd = std::move(proprio_cmd);
  if (prev_action) {
    s.prev_action = std::vector<double>(prev_action->data(), prev_action->data() + 12);
  }
  steps_.push_back(std::move(s));
  while (static_cast<int>(steps_.size()) > context_) steps_.pop_front();
  maps_ = std::move(heightfields);
}

int TokenWindow::num_tokens() const {
  int n = 1;  // heightfield token at the final position
  for (const auto& s : steps_) n += s.prev_action ? 2 : 1;
  return n;
}

// ---------------------------------------------------------------------------
// Locomotion-Transformer
// ---------------------------------------------------------------------------

std::string LocoTransformerConfig::to_json() const {
  json j;
  j["kind"] = "locomotion_transformer";
  j["d_model"] = d_model;
  j["layers"] = layers;
  j["heads"] = heads;
  j["context"] = context;
  j["mlp_mult"] = mlp_mult;
  j["conv_channels"] = conv_channels;
  j["map_embed"] = map_embed;
  j["proprio_cmd_dim"] = proprio_cmd_dim;
  j["action_dim"] = action_dim;
  j["input_mode"] = input_mode;
  j["maps"] = json::array();
  for (const auto& m : maps)
    j["maps"].push_back({{"rows", m.rows},
                         {"cols", m.cols},
                         {"spacing", m.spacing},
                         {"forward", m.anchor == HeightfieldSpec::Anchor::kForwardStrip}});
  return j.dump();
}

LocoTransformerConfig LocoTransformerConfig::from_json(const std::string& s) {
  const json j = json::parse(s);
  LocoTransformerConfig c;
  c.d_model = j.at("d_model").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.context = j.at("context").get<int>();
  c.mlp_mult = j.value("mlp_mult", 4);
  c.conv_channels = j.value("conv_channels", 8);
  c.map_embed = j.value("map_embed", 64);
  c.proprio_cmd_dim = j.value("proprio_cmd_dim", 19);
  c.action_dim = j.value("action_dim", 12);
  c.input_mode = j.value("input_mode", "command");
  c.maps.clear();
  for (const auto& m : j.at("maps")) {
    HeightfieldSpec spec;
    spec.rows = m.at("rows").get<int>();
    spec.cols = m.at("cols").get<int>();
    spec.spacing = m.at("spacing").get<double>();
    spec.anchor = m.value("forward", false) ? HeightfieldSpec::Anchor::kForwardStrip
                                            : HeightfieldSpec::Anchor::kCenteredOnCom;
    c.maps.push_back(spec);
  }
  return c;
}

template <typename T>
LocoTransformerNetT<T> LocoTransformerNetT<T>::create(const LocoTransformerConfig& cfg,
                                                      uint64_t seed) {
  if (cfg.d_model % cfg.heads != 0)
    throw std::invalid_argument("d_model must be divisible by heads");
  LocoTransformerNetT<T> net;
  net.cfg = cfg;
  Rng rng = Rng::substream(seed, "locotransformer");
  const T base_std = T(0.02);
  const T resid_std = T(0.02) / std::sqrt(T(2) * cfg.layers);
  auto normal = [&rng](std::vector<int> shape, T stddev) {
    auto t = nn::make_tensor<T>(std::move(shape), true);
    nn::init_normal(*t, stddev, rng);
    return t;
  };
  auto zeros = [](std::vector<int> shape) { return nn::make_tensor<T>(std::move(shape), true); };
  auto ones = [](std::vector<int> shape) { return nn::full<T>(std::move(shape), T(1), true); };

  const int C = cfg.conv_channels;
  for (const auto& m : cfg.maps) {
    ConvTokenizerT<T> enc;
    enc.w1 = nn::make_tensor<T>({C, 1, 3, 3}, true);
    nn::init_kaiming(*enc.w1, 9, rng);
    enc.b1 = zeros({C});
    enc.w2 = nn::make_tensor<T>({C, C, 3, 3}, true);
    nn::init_kaiming(*enc.w2, 9 * C, rng);
    enc.b2 = zeros({C});
    const int flat = C * m.rows * m.cols;
    enc.proj_w = nn::make_tensor<T>({flat, cfg.map_embed}, true);
    nn::init_kaiming(*enc.proj_w, flat, rng);
    enc.proj_b = zeros({cfg.map_embed});
    net.encoders.push_back(enc);
  }
  const int join_in = cfg.map_embed * static_cast<int>(cfg.maps.size());
  net.map_join_w = normal({join_in, cfg.d_model}, base_std);
  net.map_join_b = zeros({cfg.d_model});
  net.proprio_w = normal({cfg.proprio_cmd_dim, cfg.d_model}, base_std);
  net.proprio_b = zeros({cfg.d_model});
  net.action_w = normal({cfg.action_dim, cfg.d_model}, base_std);
  net.action_b = zeros({cfg.d_model});
  net.pos_emb = normal({cfg.max_tokens(), cfg.d_model}, T(0.01));

  for (int l = 0; l < cfg.layers; ++l) {
    TransformerBlockT<T> blk;
    blk.ln1_g = ones({cfg.d_model});
    blk.ln1_b = zeros({cfg.d_model});
    blk.qkv_w = normal({cfg.d_model, 3 * cfg.d_model}, base_std);
    blk.qkv_b = zeros({3 * cfg.d_model});
    blk.attn_w = normal({cfg.d_model, cfg.d_model}, resid_std);
    blk.attn_b = zeros({cfg.d_model});
    blk.ln2_g = ones({cfg.d_model});
    blk.ln2_b = zeros({cfg.d_model});
    blk.fc_w = normal({cfg.d_model, cfg.mlp_mult * cfg.d_model}, base_std);
    blk.fc_b = zeros({cfg.mlp_mult * cfg.d_model});
    blk.proj_w = normal({cfg.mlp_mult * cfg.d_model, cfg.d_model}, resid_std);
    blk.proj_b = zeros({cfg.d_model});
    net.blocks.push_back(blk);
  }
  net.final_ln_g = ones({cfg.d_model});
  net.final_ln_b = zeros({cfg.d_model});
  net.head_w = normal({cfg.d_model, cfg.action_dim}, T(0.01));
  net.head_b = zeros({cfg.action_dim});
  return net;
}

template <typename T>
nn::TensorRefT<T> LocoTransformerNetT<T>::forward(nn::TapeT<T>& tape,
                                                  const WindowBatchT<T>& batch) const {
  if (batch.map_inputs.size() != encoders.size())
    throw std::invalid_argument("window batch map count mismatch");
  const int B = batch.batch;
  const int D = cfg.d_model;
  const int Tn = cfg.max_tokens();

  // Heightfield token: conv-encode each map, concat, project.
  std::vector<nn::TensorRefT<T>> embeds;
  for (size_t m = 0; m < encoders.size(); ++m) {
    const auto& e = encoders[m];
    auto h = tape.relu(tape.conv2d(batch.map_inputs[m], e.w1, e.b1));
    h = tape.relu(tape.conv2d(h, e.w2, e.b2));
    h = tape.reshape(h, {B, static_cast<int>(h->size() / B)});
    embeds.push_back(tape.relu(tape.linear(h, e.proj_w, e.proj_b)));
  }
  auto hf_tok = tape.linear(tape.concat_cols(embeds), map_join_w, map_join_b);  // [B, D]

  auto proprio_tok = tape.linear(batch.proprio_rows, proprio_w, proprio_b);
  auto action_tok = tape.linear(batch.action_rows, action_w, action_b);
  auto zero_row = nn::make_tensor<T>({1, D});

  auto token_matrix = tape.concat_rows({proprio_tok, action_tok, hf_tok, zero_row});
  auto seq = tape.gather_rows(token_matrix, batch.gather);        // [B*Tn, D]
  auto pos = tape.gather_rows(pos_emb, batch.positions);          // [B*Tn, D]
  auto x = tape.reshape(tape.add(seq, pos), {B, Tn, D});

  for (const auto& blk : blocks) {
    auto h = tape.layernorm(x, blk.ln1_g, blk.ln1_b);
    auto qkv = tape.linear(h, blk.qkv_w, blk.qkv_b);  // [B,Tn,3D]
    auto q = tape.slice_cols(qkv, 0, D);
    auto k = tape.slice_cols(qkv, D, D);
    auto v = tape.slice_cols(qkv, 2 * D, D);
    auto attn = tape.causal_attention(q, k, v, cfg.heads);
    x = tape.add(x, tape.linear(attn, blk.attn_w, blk.attn_b));
    auto h2 = tape.layernorm(x, blk.ln2_g, blk.ln2_b);
    auto mlp = tape.linear(tape.relu(tape.linear(h2, blk.fc_w, blk.fc_b)), blk.proj_w,
                           blk.proj_b);
    x = tape.add(x, mlp);
  }
  auto y = tape.layernorm(x, final_ln_g, final_ln_b);

  std::vector<int> readout_flat(batch.readout.size());
  for (size_t i = 0; i < batch.readout.size(); ++i)
    readout_flat[i] = static_cast<int>(i) * Tn + batch.readout[i];
  auto last = tape.gather_rows(y, readout_flat);  // [B, D]
  return tape.linear(last, head_w, head_b);       // [B, action_dim]
}

template <typename T>
std::vector<std::pair<std::string, nn::TensorRefT<T>>>
LocoTransformerNetT<T>::named_tensors() const {
  std::vector<std::pair<std::string, nn::TensorRefT<T>>> out;
  for (size_t m = 0; m < encoders.size(); ++m) {
    const std::string p = "tokenizer.map" + std::to_string(m);
    out.emplace_back(p + ".conv1.w", encoders[m].w1);
    out.emplace_back(p + ".conv1.b", encoders[m].b1);
    out.emplace_back(p + ".conv2.w", encoders[m].w2);
    out.emplace_back(p + ".conv2.b", encoders[m].b2);
    out.emplace_back(p + ".proj.w", encoders[m].proj_w);
    out.emplace_back(p + ".proj.b", encoders[m].proj_b);
  }
  out.emplace_back("tokenizer.join.w", map_join_w);
  out.emplace_back("tokenizer.join.b", map_join_b);
  out.emplace_back("tokenizer.proprio.w", proprio_w);
  out.emplace_back("tokenizer.proprio.b", proprio_b);
  out.emplace_back("tokenizer.action.w", action_w);
  out.emplace_back("tokenizer.action.b", action_b);
  out.emplace_back("pos_emb", pos_emb);
  for (size_t l = 0; l < blocks.size(); ++l) {
    const std::string p = "block" + std::to_string(l);
    out.emplace_back(p + ".ln1.g", blocks[l].ln1_g);
    out.emplace_back(p + ".ln1.b", blocks[l].ln1_b);
    out.emplace_back(p + ".attn.qkv.w", blocks[l].qkv_w);
    out.emplace_back(p + ".attn.qkv.b", blocks[l].qkv_b);
    out.emplace_back(p + ".attn.out.w", blocks[l].attn_w);
    out.emplace_back(p + ".attn.out.b", blocks[l].attn_b);
    out.emplace_back(p + ".ln2.g", blocks[l].ln2_g);
    out.emplace_back(p + ".ln2.b", blocks[l].ln2_b);
    out.emplace_back(p + ".mlp.fc.w", blocks[l].fc_w);
    out.emplace_back(p + ".mlp.fc.b", blocks[l].fc_b);
    out.emplace_back(p + ".mlp.proj.w", blocks[l].proj_w);
    out.emplace_back(p + ".mlp.proj.b", blocks[l].proj_b);
  }
  out.emplace_back("final_ln.g", final_ln_g);
  out.emplace_back("final_ln.b", final_ln_b);
  out.emplace_back("head.w", head_w);
  out.emplace_back("head.b", head_b);
  return out;
}

template <typename T>
std::vector<nn::TensorRefT<T>> LocoTransformerNetT<T>::tensors() const {
  std::vector<nn::TensorRefT<T>> out;
  for (auto& [n, t] : named_tensors()) out.push_back(t);
  return out;
}

template <typename T>
int64_t LocoTransformerNetT<T>::param_count() const {
  int64_t n = 0;
  for (const auto& t : tensors()) n += t->size();
  return n;
}

template <typename T>
WindowBatchT<T> make_window_batch(const LocoTransformerConfig& cfg,
                                  const std::vector<const TokenWindow*>& windows) {
  WindowBatchT<T> batch;
  batch.batch = static_cast<int>(windows.size());
  const int B = batch.batch;
  const int Tn = cfg.max_tokens();

  int np = 0, na = 0;
  for (const auto* w : windows) {
    if (w->num_steps() == 0) throw std::invalid_argument("empty token window");
    if (w->heightfields().size() != cfg.maps.size())
      throw std::invalid_argument("window heightfield count mismatch");
    np += w->num_steps();
    for (const auto& s : w->steps())
      if (s.prev_action) ++na;
  }

  batch.proprio_rows = nn::make_tensor<T>({np, cfg.proprio_cmd_dim});
  batch.action_rows = nn::make_tensor<T>({std::max(na, 1), cfg.action_dim});
  for (size_t m = 0; m < cfg.maps.size(); ++m)
    batch.map_inputs.push_back(
        nn::make_tensor<T>({B, 1, cfg.maps[m].rows, cfg.maps[m].cols}));

  batch.gather.assign(static_cast<size_t>(B) * Tn, np + std::max(na, 1) + B);  // zero row
  batch.positions.assign(static_cast<size_t>(B) * Tn, 0);
  batch.readout.resize(B);

  int pi = 0, ai = 0;
  for (int b = 0; b < B; ++b) {
    const auto* w = windows[b];
    int slot = 0;
    auto put = [&](int row_index) {
      batch.gather[static_cast<size_t>(b) * Tn + slot] = row_index;
      batch.positions[static_cast<size_t>(b) * Tn + slot] = slot;
      ++slot;
    };
    for (const auto& s : w->steps()) {
      if (static_cast<int>(s.proprio_cmd.size()) != cfg.proprio_cmd_dim)
        throw std::invalid_argument("window proprio width mismatch");
      if (s.prev_action) {
        for (int j = 0; j < cfg.action_dim; ++j)
          batch.action_rows->val[static_cast<size_t>(ai) * cfg.action_dim + j] =
              static_cast<T>((*s.prev_action)[j]);
        put(np + ai);
        ++ai;
      }
      for (int j = 0; j < cfg.proprio_cmd_dim; ++j)
        batch.proprio_rows->val[static_cast<size_t>(pi) * cfg.proprio_cmd_dim + j] =
            static_cast<T>(s.proprio_cmd[j]);
      put(pi);
      ++pi;
    }
    // Heightfield token closes the sequence.
    put(np + std::max(na, 1) + b);
    batch.readout[b] = slot - 1;
    for (size_t m = 0; m < cfg.maps.size(); ++m) {
      const auto& grid = w->heightfields()[m];
      if (static_cast<int>(grid.size()) != cfg.maps[m].cells())
        throw std::invalid_argument("window heightfield size mismatch");
      auto& dst = batch.map_inputs[m]->val;
      const size_t off = static_cast<size_t>(b) * grid.size();
      for (size_t i = 0; i < grid.size(); ++i) dst[off + i] = static_cast<T>(grid[i]);
    }
  }
  return batch;
}

LocoTransformer LocoTransformer::create(const LocoTransformerConfig& cfg, uint64_t seed) {
  LocoTransformer t;
  t.net = LocoTransformerNet::create(cfg, seed);
  return t;
}

Vec12 LocoTransformer::act(const TokenWindow& window) const {
  nn::Tape tape;
  auto batch = make_window_batch<float>(net.cfg, {&window});
  auto out = net.forward(tape, batch);
  Vec12 a;
  for (int j = 0; j < net.cfg.action_dim; ++j) a[j] = clamp(out->val[j], -1.0, 1.0);
  return a;
}

nn::ParamMap LocoTransformer::params() const {
  nn::ParamMap m;
  for (auto& [name, t] : net.named_tensors()) m.add(name, t);
  return m;
}

void LocoTransformer::save(const std::string& dir, int64_t step) const {
  nn::save_checkpoint(dir, params(), step, net.cfg.to_json());
}

LocoTransformer LocoTransformer::load(const std::string& dir) {
  const auto arch = nn::checkpoint_arch(dir);
  const auto cfg = LocoTransformerConfig::from_json(arch);
  LocoTransformer t = create(cfg, 0);
  nn::ParamMap m = t.params();
  nn::load_checkpoint(dir, m);
  return t;
}

Vec12 action_to_targets(const Vec12& action, const RobotModel& model) {
  Vec12 q;
  for (int j = 0; j < kNumJoints; ++j)
    q[j] = clamp(model.q_default[j] + model.action_scale * action[j], model.joint_lo[j],
                 model.joint_hi[j]);
  return q;
}

template struct LocoTransformerNetT<float>;
template struct LocoTransformerNetT<double>;
template WindowBatchT<float> make_window_batch<float>(
    const LocoTransformerConfig&, const std::vector<const TokenWindow*>&);
template WindowBatchT<double> make_window_batch<double>(
    const LocoTransformerConfig&, const std::vector<const TokenWindow*>&);

}  // namespace barkour
