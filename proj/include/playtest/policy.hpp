#pragma once

// Dynamic tests: feedforward action-selection networks trained by
// backpropagation on recorded playthroughs, with a distance-based surprise
// adequacy signal over hidden activations.

#include <Eigen/Dense>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "playtest/assertion.hpp"
#include "playtest/game.hpp"
#include "playtest/util.hpp"

namespace playtest {

inline constexpr int kFeatureCount = 9;

// [player x, player y, nearest coin dx, dy, coin present, nearest bomb dx, dy,
//  score, game over]. Positions are normalized by the grid size; absent
// actors give zero deltas.
inline Eigen::VectorXd featurize(const ObservationFrame& f, int width = default_level().width,
                                 int height = default_level().height) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(kFeatureCount);
  const ActorView& p = f.player();
  const double w = width;
  const double h = height;
  v(0) = static_cast<double>(p.x) / w;
  v(1) = static_cast<double>(p.y) / h;
  auto nearest = [&](ActorKind kind) -> const ActorView* {
    const ActorView* best = nullptr;
    std::int64_t best_d = std::numeric_limits<std::int64_t>::max();
    for (const auto& a : f.actors) {
      if (a.kind != kind || !a.alive) continue;
      std::int64_t d = std::llabs(a.x - p.x) + std::llabs(a.y - p.y);
      if (d < best_d) {
        best_d = d;
        best = &a;
      }
    }
    return best;
  };
  if (const ActorView* c = nearest(ActorKind::Coin)) {
    v(2) = static_cast<double>(c->x - p.x) / w;
    v(3) = static_cast<double>(c->y - p.y) / h;
    v(4) = 1.0;
  }
  if (const ActorView* b = nearest(ActorKind::Bomb)) {
    v(5) = static_cast<double>(b->x - p.x) / w;
    v(6) = static_cast<double>(b->y - p.y) / h;
  }
  v(7) = static_cast<double>(f.score) / 100.0;
  v(8) = f.game_over ? 1.0 : 0.0;
  return v;
}

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 200;
  int batch = 16;
  int hidden = 16;
  std::uint64_t seed = 1;
};

inline TrainConfig parse_train_config(std::string_view text) {
  TrainConfig c;
  for (const auto& raw : split(text, '\n')) {
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw IntegrityError("train config: expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "learning_rate") c.learning_rate = std::stod(value);
    else if (key == "epochs") c.epochs = static_cast<int>(parse_int(value, "epochs"));
    else if (key == "batch") c.batch = static_cast<int>(parse_int(value, "batch"));
    else if (key == "hidden") c.hidden = static_cast<int>(parse_int(value, "hidden"));
    else if (key == "seed") c.seed = parse_u64(value, "seed");
    else throw IntegrityError("train config: unknown key '" + key + "'");
  }
  return c;
}

struct PolicyNet {
  Eigen::MatrixXd w1;  // hidden x input
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // output x hidden
  Eigen::VectorXd b2;
  int target_statement = -1;
  std::vector<Eigen::VectorXd> activation_store;
  std::vector<double> loss_history;  // mean loss before training, then after every epoch

  int inputs() const { return static_cast<int>(w1.cols()); }
  int hidden() const { return static_cast<int>(w1.rows()); }
  int outputs() const { return static_cast<int>(w2.rows()); }

  static PolicyNet random(int inputs, int hidden, int outputs, std::uint64_t seed) {
    PolicyNet net;
    SplitMix64 rng(seed);
    auto fill = [&](Eigen::MatrixXd& m, double scale) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * rng.uniform() - 1.0) * scale;
    };
    net.w1.resize(hidden, inputs);
    net.w2.resize(outputs, hidden);
    fill(net.w1, 1.0 / std::sqrt(static_cast<double>(inputs)));
    fill(net.w2, 1.0 / std::sqrt(static_cast<double>(hidden)));
    net.b1 = Eigen::VectorXd::Zero(hidden);
    net.b2 = Eigen::VectorXd::Zero(outputs);
    return net;
  }

  Eigen::VectorXd hidden_activation(const Eigen::VectorXd& x) const { return (w1 * x + b1).array().tanh(); }

  Eigen::VectorXd probabilities(const Eigen::VectorXd& x) const {
    Eigen::VectorXd logits = w2 * hidden_activation(x) + b2;
    Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
    return e / e.sum();
  }

  int act(const Eigen::VectorXd& x) const {
    Eigen::Index best = 0;
    probabilities(x).maxCoeff(&best);
    return static_cast<int>(best);
  }
};

struct Gradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
};

// Mean cross-entropy over the batch (columns of `inputs`) and its gradient.
inline double loss_and_gradient(const PolicyNet& net, const Eigen::MatrixXd& inputs, const std::vector<int>& labels,
                                Gradients* grad) {
  const Eigen::Index n = inputs.cols();
  Eigen::MatrixXd pre = (net.w1 * inputs).colwise() + net.b1;
  Eigen::MatrixXd h = pre.array().tanh();
  Eigen::MatrixXd logits = (net.w2 * h).colwise() + net.b2;
  Eigen::MatrixXd probs(logits.rows(), n);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd e = (logits.col(j).array() - logits.col(j).maxCoeff()).exp();
    probs.col(j) = e / e.sum();
    loss -= std::log(std::max(probs(labels[static_cast<std::size_t>(j)], j), 1e-300));
  }
  loss /= static_cast<double>(n);
  if (grad) {
    Eigen::MatrixXd dlogits = probs;
    for (Eigen::Index j = 0; j < n; ++j) dlogits(labels[static_cast<std::size_t>(j)], j) -= 1.0;
    dlogits /= static_cast<double>(n);
    grad->w2 = dlogits * h.transpose();
    grad->b2 = dlogits.rowwise().sum();
    Eigen::MatrixXd dpre = (net.w2.transpose() * dlogits).array() * (1.0 - h.array().square());
    grad->w1 = dpre * inputs.transpose();
    grad->b1 = dpre.rowwise().sum();
  }
  return loss;
}

struct Dataset {
  Eigen::MatrixXd inputs;  // one column per sample
  std::vector<int> labels;
};

// Samples (observation before action t, action t) from each trace up to and
// including the first step that executes `target`. Traces that never reach
// the target are skipped.
inline Dataset build_dataset(const std::vector<Trace>& traces, int target, int width, int height) {
  std::vector<Eigen::VectorXd> xs;
  Dataset d;
  for (const auto& t : traces) {
    std::size_t reach = t.length();
    for (std::size_t k = 0; k < t.length(); ++k) {
      if (std::find(t.covered[k].begin(), t.covered[k].end(), target) != t.covered[k].end()) {
        reach = k;
        break;
      }
    }
    if (reach == t.length()) continue;
    for (std::size_t k = 0; k <= reach; ++k) {
      xs.push_back(featurize(k == 0 ? t.initial : t.frames[k - 1], width, height));
      d.labels.push_back(static_cast<int>(t.actions[k]));
    }
  }
  d.inputs.resize(kFeatureCount, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) d.inputs.col(static_cast<Eigen::Index>(i)) = xs[i];
  return d;
}

// Dynamic tests are only exported for statements this many traces reach.
inline constexpr std::size_t kMinPolicyTraces = 3;

inline std::size_t traces_covering(const std::vector<Trace>& traces, int statement) {
  return static_cast<std::size_t>(std::count_if(traces.begin(), traces.end(), [&](const Trace& t) {
    return std::any_of(t.covered.begin(), t.covered.end(), [&](const std::vector<int>& step) {
      return std::find(step.begin(), step.end(), statement) != step.end();
    });
  }));
}

inline PolicyNet train_policy(const std::vector<Trace>& traces, int target_statement, const TrainConfig& cfg = {},
                              const LevelLayout& level = default_level()) {
  Dataset data = build_dataset(traces, target_statement, level.width, level.height);
  if (data.labels.empty())
    throw PreconditionError("untrainable target: no trace covers statement " + std::to_string(target_statement));

  PolicyNet net = PolicyNet::random(kFeatureCount, cfg.hidden, static_cast<int>(kActionCount), cfg.seed);
  net.target_statement = target_statement;
  const std::size_t n = data.labels.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  SplitMix64 rng(cfg.seed ^ 0x5bd1e995ULL);

  net.loss_history.push_back(loss_and_gradient(net, data.inputs, data.labels, nullptr));
  const std::size_t batch = static_cast<std::size_t>(std::max(1, cfg.batch));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
    for (std::size_t start = 0; start < n; start += batch) {
      std::size_t end = std::min(n, start + batch);
      Eigen::MatrixXd xb(kFeatureCount, static_cast<Eigen::Index>(end - start));
      std::vector<int> yb;
      for (std::size_t k = start; k < end; ++k) {
        xb.col(static_cast<Eigen::Index>(k - start)) = data.inputs.col(static_cast<Eigen::Index>(order[k]));
        yb.push_back(data.labels[order[k]]);
      }
      Gradients g;
      loss_and_gradient(net, xb, yb, &g);
      net.w1 -= cfg.learning_rate * g.w1;
      net.b1 -= cfg.learning_rate * g.b1;
      net.w2 -= cfg.learning_rate * g.w2;
      net.b2 -= cfg.learning_rate * g.b2;
    }
    net.loss_history.push_back(loss_and_gradient(net, data.inputs, data.labels, nullptr));
  }
  for (Eigen::Index j = 0; j < data.inputs.cols(); ++j)
    net.activation_store.push_back(net.hidden_activation(data.inputs.col(j)));
  return net;
}

// Distance from the frame's hidden activation to its nearest stored neighbour.
inline double surprise(const PolicyNet& net, const Eigen::VectorXd& features) {
  if (net.activation_store.empty()) throw PreconditionError("activation store is empty");
  Eigen::VectorXd a = net.hidden_activation(features);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : net.activation_store) best = std::min(best, (a - s).squaredNorm());
  return std::sqrt(best);
}

inline double surprise(const PolicyNet& net, const ObservationFrame& frame, const LevelLayout& level = default_level()) {
  return surprise(net, featurize(frame, level.width, level.height));
}

struct DynamicVerdict {
  bool target_reached = false;
  double max_surprise = 0.0;
  bool surprise_alarm = false;
  std::vector<Verdict> assertion_verdicts;
  Trace trace;
};

// Argmax rollout until the target statement runs, the game ends or the
// budget is spent.
inline DynamicVerdict run_dynamic_test(const PolicyNet& net, const RuleScript& script, std::uint64_t seed, int budget,
                                       double sa_threshold, const std::vector<Assertion>& assertions = {},
                                       const LevelLayout& level = default_level()) {
  if (budget <= 0) throw PreconditionError("budget must be positive");
  DynamicVerdict v;
  WorldState s = new_world(script, level, seed);
  v.trace.script_hash = script_hash(script);
  v.trace.seed = seed;
  v.trace.initial = observe(s);
  ObservationFrame frame = v.trace.initial;
  for (int tick = 0; tick < budget && !s.game_over; ++tick) {
    Eigen::VectorXd x = featurize(frame, level.width, level.height);
    v.max_surprise = std::max(v.max_surprise, surprise(net, x));
    Action a = static_cast<Action>(net.act(x));
    StepResult r = step(script, s, a);
    s = std::move(r.state);
    frame = observe(s);
    v.trace.actions.push_back(a);
    v.trace.frames.push_back(frame);
    bool hit = std::find(r.executed.begin(), r.executed.end(), net.target_statement) != r.executed.end();
    v.trace.covered.push_back(std::move(r.executed));
    v.trace.shadow.push_back(std::move(r.shadow));
    if (hit) {
      v.target_reached = true;
      break;
    }
  }
  v.surprise_alarm = v.max_surprise > sa_threshold;
  for (const auto& a : assertions) v.assertion_verdicts.push_back(evaluate(a, v.trace, ScopePolicy::Clamp));
  return v;
}

// --- export ------------------------------------------------------------------

inline std::string serialize_policy(const PolicyNet& net) {
  std::ostringstream os;
  os << std::setprecision(9);
  os << "POLICYNET\t" << net.inputs() << '\t' << net.hidden() << '\t' << net.outputs() << '\t' << net.target_statement
     << '\n';
  auto row = [&](const auto& values, Eigen::Index count) {
    for (Eigen::Index i = 0; i < count; ++i) os << (i ? "\t" : "") << values(i);
    os << '\n';
  };
  for (Eigen::Index r = 0; r < net.w1.rows(); ++r) row(net.w1.row(r), net.w1.cols());
  row(net.b1, net.b1.size());
  for (Eigen::Index r = 0; r < net.w2.rows(); ++r) row(net.w2.row(r), net.w2.cols());
  row(net.b2, net.b2.size());
  os << "STORE\t" << net.activation_store.size() << '\n';
  for (const auto& a : net.activation_store) row(a, a.size());
  return os.str();
}

inline PolicyNet parse_policy(std::string_view text) {
  auto lines = split_lines(text);
  std::size_t i = 0;
  auto numbers = [&](Eigen::Index expected) {
    if (i >= lines.size()) throw IntegrityError("policy file truncated");
    auto f = split(lines[i++], '\t');
    if (static_cast<Eigen::Index>(f.size()) != expected) throw IntegrityError("policy row has wrong width");
    Eigen::VectorXd v(expected);
    for (Eigen::Index k = 0; k < expected; ++k) v(k) = std::stod(f[static_cast<std::size_t>(k)]);
    return v;
  };
  if (lines.empty()) throw IntegrityError("empty policy file");
  auto header = split(lines[i++], '\t');
  if (header.size() != 5 || header[0] != "POLICYNET") throw IntegrityError("bad policy header");
  int in = static_cast<int>(parse_int(header[1], "inputs"));
  int hid = static_cast<int>(parse_int(header[2], "hidden"));
  int out = static_cast<int>(parse_int(header[3], "outputs"));
  PolicyNet net;
  net.target_statement = static_cast<int>(parse_int(header[4], "target"));
  net.w1.resize(hid, in);
  for (int r = 0; r < hid; ++r) net.w1.row(r) = numbers(in).transpose();
  net.b1 = numbers(hid);
  net.w2.resize(out, hid);
  for (int r = 0; r < out; ++r) net.w2.row(r) = numbers(hid).transpose();
  net.b2 = numbers(out);
  if (i >= lines.size()) throw IntegrityError("policy file missing activation store");
  auto store = split(lines[i++], '\t');
  if (store.size() != 2 || store[0] != "STORE") throw IntegrityError("bad STORE line");
  auto count = parse_u64(store[1], "store size");
  for (std::uint64_t k = 0; k < count; ++k) net.activation_store.push_back(numbers(hid));
  return net;
}

}  // namespace playtest
