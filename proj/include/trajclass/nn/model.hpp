#pragma once

// Fixed classifier architectures over a (strided) prefix of U's path.
//
//   Dense:  flatten(L x 2) -> [dense + relu]* -> logits
//   Conv1D: conv(kernel 2) + relu -> flatten -> [dense + relu]* -> logits
//   LSTM:   recurrence over L steps, last h -> [dense + relu]* -> logits
//   GRU:    as LSTM
//
// L = ceil(T / stride); the sampled indices end at T - 1 and step back by
// the stride, so the newest point is always included.

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "trajclass/data.hpp"
#include "trajclass/nn/layers.hpp"
#include "trajclass/nn/optimizer.hpp"
#include "trajclass/nn/tensor.hpp"
#include "trajclass/rng.hpp"

namespace trajclass::nn {

enum class Family { Dense, Conv1D, LSTM, GRU };

inline constexpr Family kAllFamilies[] = {Family::Dense, Family::Conv1D, Family::LSTM, Family::GRU};

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::Dense: return "dense";
    case Family::Conv1D: return "conv1d";
    case Family::LSTM: return "lstm";
    case Family::GRU: return "gru";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  for (auto f : kAllFamilies) {
    if (to_string(f) == s) return f;
  }
  throw std::invalid_argument("unknown model family '" + std::string(s) + "'");
}

/// Architecture description. hidden_sizes means:
///   Dense:   widths of the hidden dense layers
///   Conv1D:  [channels, dense widths...]
///   LSTM/GRU: [recurrent width, dense widths...]
struct ModelSpec {
  Family family = Family::Dense;
  std::size_t input_stride = 1;
  std::vector<std::size_t> hidden_sizes;
  std::size_t num_classes = 3;
  std::uint64_t seed = 0;

  /// Defaults sized so a full 5-fold cell at T = 6000 trains in about a
  /// minute on one core.
  static ModelSpec defaults(Family f) {
    ModelSpec s;
    s.family = f;
    switch (f) {
      case Family::Dense:
        s.input_stride = 20;
        s.hidden_sizes = {128, 64};
        break;
      case Family::Conv1D:
        s.input_stride = 20;
        s.hidden_sizes = {8, 32};
        break;
      case Family::LSTM:
      case Family::GRU:
        s.input_stride = 100;
        s.hidden_sizes = {32};
        break;
    }
    return s;
  }

  void validate() const {
    if (input_stride < 1) throw std::invalid_argument("ModelSpec: input_stride must be >= 1");
    if (num_classes < 2) throw std::invalid_argument("ModelSpec: num_classes must be >= 2");
    for (auto h : hidden_sizes) {
      if (h == 0) throw std::invalid_argument("ModelSpec: hidden sizes must be positive");
    }
    if (family != Family::Dense && hidden_sizes.empty()) {
      throw std::invalid_argument("ModelSpec: " + std::string(to_string(family)) +
                                  " needs hidden_sizes[0] (channels / recurrent width)");
    }
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

inline constexpr std::size_t kInputChannels = 2;

inline std::size_t sequence_length(std::size_t timesteps, std::size_t stride) {
  return (timesteps + stride - 1) / stride;
}

/// Strided (x, y) sequence of U's path, row-major [L x 2].
inline std::vector<double> model_input(const LabeledTrajectory& traj, std::size_t timesteps, std::size_t stride) {
  if (traj.size() != timesteps) {
    throw ShapeError("model input: trajectory has " + std::to_string(traj.size()) + " steps, model expects " +
                     std::to_string(timesteps));
  }
  const std::size_t len = sequence_length(timesteps, stride);
  std::vector<double> out(len * kInputChannels);
  for (std::size_t k = 0; k < len; ++k) {
    const std::size_t idx = timesteps - 1 - (len - 1 - k) * stride;
    out[k * 2] = traj.u[idx].x;
    out[k * 2 + 1] = traj.u[idx].y;
  }
  return out;
}

class Model {
 public:
  Model(ModelSpec spec, std::size_t timesteps) : spec_(std::move(spec)), timesteps_(timesteps) {
    spec_.validate();
    if (timesteps_ == 0) throw std::invalid_argument("Model: timesteps must be positive");
    len_ = nn::sequence_length(timesteps_, spec_.input_stride);
    allocate();
    initialize();
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  std::size_t timesteps() const noexcept { return timesteps_; }
  std::size_t sequence_length() const noexcept { return len_; }

  std::vector<Parameter>& parameters() noexcept { return params_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }

  Parameter& parameter(std::string_view name) {
    for (auto& p : params_) {
      if (p.name == name) return p;
    }
    throw std::out_of_range("no parameter named " + std::string(name));
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
  }

  /// Logits for an input of shape [L x 2]. Keeps activations for backward().
  std::span<const double> forward(std::span<const double> input) {
    require_size(input.size(), len_ * kInputChannels, "model input");
    input_.assign(input.begin(), input.end());
    switch (spec_.family) {
      case Family::Dense:
        head_in_ = input_;
        break;
      case Family::Conv1D: {
        auto& k = params_[0].value;
        auto& b = params_[1].value;
        conv_out_.resize((len_ - 1) * k.shape[0]);
        conv1d_forward(input_, len_, k, b, conv_out_);
        for (auto& v : conv_out_) v = std::max(v, 0.0);
        head_in_ = conv_out_;
        break;
      }
      case Family::LSTM: forward_lstm(); break;
      case Family::GRU: forward_gru(); break;
    }
    forward_head();
    return acts_.back();
  }

  /// Accumulates parameter gradients for dL/dlogits of the last forward().
  void backward(std::span<const double> dlogits) {
    require_size(dlogits.size(), spec_.num_classes, "logit gradient");
    const bool need_dx = spec_.family != Family::Dense;
    backward_head(dlogits, need_dx);
    switch (spec_.family) {
      case Family::Dense: break;
      case Family::Conv1D: {
        for (std::size_t i = 0; i < conv_out_.size(); ++i) {
          if (conv_out_[i] <= 0.0) d_head_in_[i] = 0.0;
        }
        conv1d_backward(input_, len_, params_[0].value, d_head_in_, {}, params_[0].grad, params_[1].grad);
        break;
      }
      case Family::LSTM: backward_lstm(); break;
      case Family::GRU: backward_gru(); break;
    }
  }

  std::vector<double> logits(const LabeledTrajectory& traj) {
    const auto in = model_input(traj, timesteps_, spec_.input_stride);
    const auto out = forward(in);
    return {out.begin(), out.end()};
  }

  /// Argmax of the logits; ties go to the lowest label.
  int predict(const LabeledTrajectory& traj) { return argmax(logits(traj)); }

 private:
  std::size_t head_input_width() const {
    switch (spec_.family) {
      case Family::Dense: return len_ * kInputChannels;
      case Family::Conv1D: return (len_ - 1) * spec_.hidden_sizes[0];
      case Family::LSTM:
      case Family::GRU: return spec_.hidden_sizes[0];
    }
    return 0;
  }

  std::vector<std::size_t> head_widths() const {
    std::vector<std::size_t> widths;
    const std::size_t skip = spec_.family == Family::Dense ? 0 : 1;
    for (std::size_t i = skip; i < spec_.hidden_sizes.size(); ++i) widths.push_back(spec_.hidden_sizes[i]);
    widths.push_back(spec_.num_classes);
    return widths;
  }

  void add(std::string name, std::vector<std::size_t> shape) {
    Parameter p{std::move(name), Tensor(shape), Tensor(shape)};
    params_.push_back(std::move(p));
  }

  void allocate() {
    const std::size_t first = spec_.hidden_sizes.empty() ? 0 : spec_.hidden_sizes[0];
    switch (spec_.family) {
      case Family::Dense: break;
      case Family::Conv1D:
        if (len_ < 2) throw ShapeError("Conv1D needs at least 2 sampled steps; reduce input_stride");
        add("conv.K", {first, kInputChannels, kConvWidth});
        add("conv.b", {first});
        break;
      case Family::LSTM:
        add("lstm.W", {4 * first, kInputChannels});
        add("lstm.U", {4 * first, first});
        add("lstm.b", {4 * first});
        break;
      case Family::GRU:
        add("gru.W", {3 * first, kInputChannels});
        add("gru.U", {3 * first, first});
        add("gru.b", {3 * first});
        break;
    }
    head_first_ = params_.size();
    std::size_t in = head_input_width();
    const auto widths = head_widths();
    for (std::size_t i = 0; i < widths.size(); ++i) {
      add("dense" + std::to_string(i) + ".W", {widths[i], in});
      add("dense" + std::to_string(i) + ".b", {widths[i]});
      in = widths[i];
    }
    acts_.resize(widths.size());
    for (std::size_t i = 0; i < widths.size(); ++i) acts_[i].resize(widths[i]);
  }

  /// Glorot-uniform weights, zero biases, LSTM forget-gate bias 1.
  void initialize() {
    Rng rng(derive_seed(spec_.seed, "init"));
    for (auto& p : params_) {
      const auto& s = p.value.shape;
      if (s.size() == 1) continue;
      std::size_t fan_out = s[0], fan_in = s[1];
      if (s.size() == 3) {  // conv kernels [C x Cin x width]
        fan_in = s[1] * s[2];
        fan_out = s[0] * s[2];
      }
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (auto& v : p.value.values) v = rng.uniform(-limit, limit);
    }
    if (spec_.family == Family::LSTM) {
      auto& b = parameter("lstm.b").value;
      const std::size_t h = spec_.hidden_sizes[0];
      for (std::size_t j = h; j < 2 * h; ++j) b[j] = 1.0;
    }
  }

  void forward_head() {
    const double* in = head_in_.data();
    std::size_t in_width = head_in_.size();
    for (std::size_t i = 0; i < acts_.size(); ++i) {
      const auto& w = params_[head_first_ + 2 * i].value;
      const auto& b = params_[head_first_ + 2 * i + 1].value;
      dense_forward({in, in_width}, w, b, acts_[i]);
      if (i + 1 < acts_.size()) {
        for (auto& v : acts_[i]) v = std::max(v, 0.0);
      }
      in = acts_[i].data();
      in_width = acts_[i].size();
    }
  }

  void backward_head(std::span<const double> dlogits, bool need_dx) {
    grad_.assign(dlogits.begin(), dlogits.end());
    for (std::size_t i = acts_.size(); i-- > 0;) {
      auto& w = params_[head_first_ + 2 * i];
      auto& b = params_[head_first_ + 2 * i + 1];
      const std::vector<double>& in = i == 0 ? head_in_ : acts_[i - 1];
      std::span<double> dx;
      if (i > 0) {
        grad_prev_.resize(in.size());
        dx = grad_prev_;
      } else if (need_dx) {
        d_head_in_.resize(in.size());
        dx = d_head_in_;
      }
      dense_backward(in, w.value, grad_, dx, w.grad, b.grad);
      if (i > 0) {
        for (std::size_t j = 0; j < in.size(); ++j) {
          if (in[j] <= 0.0) grad_prev_[j] = 0.0;  // relu
        }
        grad_.swap(grad_prev_);
      }
    }
  }

  void forward_lstm() {
    const std::size_t h = spec_.hidden_sizes[0];
    LstmParams p{params_[0].value, params_[1].value, params_[2].value};
    lstm_steps_.resize(len_);
    std::vector<double> hs(h, 0.0), cs(h, 0.0);
    for (std::size_t t = 0; t < len_; ++t) {
      lstm_cell_forward({input_.data() + t * kInputChannels, kInputChannels}, hs, cs, p, lstm_steps_[t]);
      hs = lstm_steps_[t].h;
      cs = lstm_steps_[t].c;
    }
    head_in_ = hs;
  }

  void backward_lstm() {
    const std::size_t h = spec_.hidden_sizes[0];
    LstmParams p{params_[0].value, params_[1].value, params_[2].value};
    LstmGrads g{params_[0].grad, params_[1].grad, params_[2].grad};
    std::vector<double> dh = d_head_in_, dc(h, 0.0), dh_prev(h), dc_prev(h);
    for (std::size_t t = len_; t-- > 0;) {
      lstm_cell_backward(lstm_steps_[t], p, dh, dc, {}, dh_prev, dc_prev, g, scratch_);
      dh.swap(dh_prev);
      dc.swap(dc_prev);
    }
  }

  void forward_gru() {
    const std::size_t h = spec_.hidden_sizes[0];
    GruParams p{params_[0].value, params_[1].value, params_[2].value};
    gru_steps_.resize(len_);
    std::vector<double> hs(h, 0.0);
    for (std::size_t t = 0; t < len_; ++t) {
      gru_cell_forward({input_.data() + t * kInputChannels, kInputChannels}, hs, p, gru_steps_[t]);
      hs = gru_steps_[t].h;
    }
    head_in_ = hs;
  }

  void backward_gru() {
    const std::size_t h = spec_.hidden_sizes[0];
    GruParams p{params_[0].value, params_[1].value, params_[2].value};
    GruGrads g{params_[0].grad, params_[1].grad, params_[2].grad};
    std::vector<double> dh = d_head_in_, dh_prev(h);
    for (std::size_t t = len_; t-- > 0;) {
      gru_cell_backward(gru_steps_[t], p, dh, {}, dh_prev, g, scratch_);
      dh.swap(dh_prev);
    }
  }

  ModelSpec spec_;
  std::size_t timesteps_ = 0;
  std::size_t len_ = 0;
  std::vector<Parameter> params_;
  std::size_t head_first_ = 0;

  // Workspace of the most recent forward pass.
  std::vector<double> input_, head_in_, conv_out_;
  std::vector<std::vector<double>> acts_;
  std::vector<LstmStep> lstm_steps_;
  std::vector<GruStep> gru_steps_;
  std::vector<double> grad_, grad_prev_, d_head_in_, scratch_;
};

/// Untrained model with parameters initialised from spec.seed.
inline Model build_model(const ModelSpec& spec, std::size_t timesteps) { return Model(spec, timesteps); }

// ---------------------------------------------------------------------------
// Parameter archive (text, version 1):
//
//   trajclass-model 1
//   family <dense|conv1d|lstm|gru>
//   input_stride <n>
//   hidden_sizes <n,n,...|->
//   num_classes <n>
//   seed <n>
//   timesteps <n>
//   parameters <count>
//   param <name> <rank> <d0> ... <d_rank-1>
//   <values, row-major, %.17g, whitespace separated>
//   ...

inline void save_model(const Model& model, std::ostream& os) {
  const auto& s = model.spec();
  os << "trajclass-model 1\n";
  os << "family " << to_string(s.family) << '\n';
  os << "input_stride " << s.input_stride << '\n';
  os << "hidden_sizes ";
  if (s.hidden_sizes.empty()) os << '-';
  for (std::size_t i = 0; i < s.hidden_sizes.size(); ++i) os << (i ? "," : "") << s.hidden_sizes[i];
  os << '\n';
  os << "num_classes " << s.num_classes << '\n';
  os << "seed " << s.seed << '\n';
  os << "timesteps " << model.timesteps() << '\n';
  os << "parameters " << model.parameters().size() << '\n';
  char buf[32];
  for (const auto& p : model.parameters()) {
    os << "param " << p.name << ' ' << p.value.shape.size();
    for (auto d : p.value.shape) os << ' ' << d;
    os << '\n';
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", p.value[i]);
      os << buf << ((i + 1) % 8 == 0 || i + 1 == p.value.size() ? '\n' : ' ');
    }
  }
}

inline Model load_model(std::istream& is) {
  auto expect = [&](std::string_view key) {
    std::string k;
    if (!(is >> k) || k != key) throw std::runtime_error("model archive: expected '" + std::string(key) + "'");
  };
  expect("trajclass-model");
  int version = 0;
  is >> version;
  if (version != 1) throw std::runtime_error("model archive: unsupported version " + std::to_string(version));
  ModelSpec spec;
  std::string word;
  expect("family");
  is >> word;
  spec.family = parse_family(word);
  expect("input_stride");
  is >> spec.input_stride;
  expect("hidden_sizes");
  is >> word;
  if (word != "-") {
    std::stringstream ss(word);
    std::string item;
    while (std::getline(ss, item, ',')) spec.hidden_sizes.push_back(std::stoul(item));
  }
  expect("num_classes");
  is >> spec.num_classes;
  expect("seed");
  is >> spec.seed;
  std::size_t timesteps = 0, count = 0;
  expect("timesteps");
  is >> timesteps;
  expect("parameters");
  is >> count;
  if (!is) throw std::runtime_error("model archive: malformed header");

  Model model(spec, timesteps);
  if (count != model.parameters().size()) throw std::runtime_error("model archive: parameter count mismatch");
  for (auto& p : model.parameters()) {
    expect("param");
    std::string name;
    std::size_t rank = 0;
    is >> name >> rank;
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) is >> d;
    if (name != p.name || shape != p.value.shape) {
      throw std::runtime_error("model archive: unexpected parameter " + name + " " + shape_string(shape));
    }
    for (auto& v : p.value.values) {
      if (!(is >> word)) throw std::runtime_error("model archive: truncated values for " + name);
      v = std::stod(word);
    }
  }
  return model;
}

}  // namespace trajclass::nn
