#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "abduct/errors.hpp"
#include "abduct/rng.hpp"
#include "abduct/trainer.hpp"

namespace abduct {

using Eigen::VectorXd;
using nlohmann::json;

int pick_top(const std::vector<double>& scores, TieBreak tie_break, Rng* rng) {
  if (scores.empty()) throw InputError("no scores to rank");
  double best = -std::numeric_limits<double>::infinity();
  int first = 0;
  for (int i = 0; i < static_cast<int>(scores.size()); ++i)
    if (scores[i] > best) {
      best = scores[i];
      first = i;
    }
  if (tie_break == TieBreak::kEarliest || rng == nullptr) return first;
  std::vector<int> tied;
  for (int i = first; i < static_cast<int>(scores.size()); ++i)
    if (scores[i] == best) tied.push_back(i);
  return tied[rng->below(tied.size())];
}

double analytic_random_accuracy(const std::vector<PreparedVideo>& videos) {
  double sum = 0.0;
  double n = 0.0;
  for (const auto& v : videos)
    for (const auto& t : v.data.targets) {
      sum += static_cast<double>(t.triggers.size()) / static_cast<double>(t.target);
      n += 1.0;
    }
  return n > 0.0 ? 100.0 * sum / n : 0.0;
}

EvalReport evaluate(Scorer& scorer, const std::vector<PreparedVideo>& videos, const std::string& split,
                    TieBreak tie_break, std::uint64_t seed) {
  EvalReport report;
  report.model = scorer.name();
  report.split = split;
  report.random_expectation = analytic_random_accuracy(videos);
  Rng rng(mix_seed(seed, 0x7e1b));
  int hits = 0;
  int all_hits = 0;
  for (const auto& v : videos) {
    if (v.data.targets.empty()) continue;
    scorer.begin_video(v);
    VideoBreakdown vb;
    vb.video_id = v.video_id;
    for (const auto& t : v.data.targets) {
      const std::vector<double> scores = scorer.score(v, t.target);
      if (static_cast<int>(scores.size()) != t.target)
        throw InputError("scorer '" + scorer.name() + "' returned " + std::to_string(scores.size()) +
                         " scores for " + std::to_string(t.target) + " premise events");
      const int top = pick_top(scores, tie_break, &rng);
      const bool hit = std::binary_search(t.triggers.begin(), t.triggers.end(), top);
      double lowest_trigger = std::numeric_limits<double>::infinity();
      double highest_other = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < t.target; ++i) {
        if (std::binary_search(t.triggers.begin(), t.triggers.end(), i))
          lowest_trigger = std::min(lowest_trigger, scores[i]);
        else
          highest_other = std::max(highest_other, scores[i]);
      }
      InstanceResult r;
      r.video_id = v.video_id;
      r.target_event_id = v.data.graph.event_ids[t.target];
      r.predicted_event_id = v.data.graph.event_ids[top];
      r.premise_count = t.target;
      r.trigger_count = static_cast<int>(t.triggers.size());
      r.correct = hit;
      report.details.push_back(r);
      hits += hit;
      all_hits += lowest_trigger > highest_other;
      ++vb.instances;
      vb.correct += hit;
    }
    report.per_video.push_back(vb);
  }
  report.instances = static_cast<int>(report.details.size());
  if (report.instances > 0) {
    report.accuracy = 100.0 * hits / report.instances;
    report.all_hit_accuracy = 100.0 * all_hits / report.instances;
  }
  return report;
}

CernScorer::CernScorer(ModelParams params, ModelOptions options, std::string name)
    : params_(std::move(params)), options_(std::move(options)), name_(std::move(name)) {
  options_.validate();
}

void CernScorer::begin_video(const PreparedVideo& video) { emb_ = forward(video.data.graph, params_, options_); }

std::vector<double> CernScorer::score(const PreparedVideo& video, int target) {
  return premise_scores(video.data.graph, emb_, target, params_);
}

RandomScorer::RandomScorer(std::uint64_t seed) : rng_(mix_seed(seed, 0x4a4d)) {}

std::vector<double> RandomScorer::score(const PreparedVideo&, int target) {
  std::vector<double> s(target);
  for (double& x : s) x = rng_.uniform();
  return s;
}

std::vector<double> FirstCollisionScorer::score(const PreparedVideo& video, int target) {
  std::vector<double> s(target, 0.0);
  int pick = 0;
  for (int i = 0; i < target; ++i)
    if (video.events[i].type == InteractionType::kCollision) {
      pick = i;
      break;
    }
  s[pick] = 1.0;
  return s;
}

std::vector<double> NodeEmbeddingScorer::score(const PreparedVideo& video, int target) {
  std::vector<double> s(target);
  for (int i = 0; i < target; ++i) {
    const double z = w_.dot(video.data.graph.features.col(i)) + b_;
    s[i] = 1.0 / (1.0 + std::exp(-z));
  }
  return s;
}

NodeEmbeddingScorer train_node_embeddings(const std::vector<PreparedVideo>& train_set,
                                          const std::vector<PreparedVideo>& val_set, const LinearConfig& config) {
  if (config.steps < 0 || config.eval_every < 1 || config.patience < 1 || !(config.learning_rate > 0.0))
    throw InputError("invalid linear baseline configuration");
  // The label of a node does not depend on the target beyond membership, so
  // each node is visited once with its positive and negative label counts.
  struct Row {
    const PreparedVideo* video;
    int node;
    double pos, neg;
  };
  std::vector<Row> rows;
  double total = 0.0;
  int d = 0;
  for (const auto& v : train_set) {
    const int n = v.data.graph.size();
    d = static_cast<int>(v.data.graph.features.rows());
    std::vector<double> pos(n, 0.0), neg(n, 0.0);
    for (const auto& t : v.data.targets)
      for (int i = 0; i < t.target; ++i)
        (std::binary_search(t.triggers.begin(), t.triggers.end(), i) ? pos[i] : neg[i]) += 1.0;
    for (int i = 0; i < n; ++i)
      if (pos[i] + neg[i] > 0.0) {
        rows.push_back({&v, i, pos[i], neg[i]});
        total += pos[i] + neg[i];
      }
  }
  if (d == 0 && !val_set.empty()) d = static_cast<int>(val_set.front().data.graph.features.rows());
  VectorXd theta = VectorXd::Zero(d + 1);
  NodeEmbeddingScorer best(theta.head(d), 0.0);
  if (rows.empty()) return best;

  auto val_acc = [&](const VectorXd& th) {
    NodeEmbeddingScorer s(th.head(d), th[d]);
    return val_set.empty() ? 0.0 : evaluate(s, val_set, "val").accuracy;
  };
  double best_acc = val_acc(theta);
  VectorXd m = VectorXd::Zero(d + 1), v2 = VectorXd::Zero(d + 1);
  int stale = 0;
  for (int step = 1; step <= config.steps; ++step) {
    VectorXd g = VectorXd::Zero(d + 1);
    for (const Row& r : rows) {
      const auto x = r.video->data.graph.features.col(r.node);
      const double p = 1.0 / (1.0 + std::exp(-(theta.head(d).dot(x) + theta[d])));
      const double dz = (r.pos * (p - 1.0) + r.neg * p) / total;
      g.head(d) += dz * x;
      g[d] += dz;
    }
    m = 0.9 * m + 0.1 * g;
    v2 = 0.999 * v2 + 0.001 * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(0.9, step);
    const double c2 = 1.0 - std::pow(0.999, step);
    theta.array() -= config.learning_rate * (m.array() / c1) / ((v2.array() / c2).sqrt() + 1e-8);
    if (step % config.eval_every == 0 || step == config.steps) {
      const double acc = val_acc(theta);
      if (acc > best_acc || val_set.empty()) {
        best_acc = acc;
        best = NodeEmbeddingScorer(theta.head(d), theta[d]);
        stale = 0;
      } else if (++stale >= config.patience) {
        break;
      }
    }
  }
  return best;
}

std::vector<std::string> ablation_names() {
  return {"full", "temporal_only", "semantic_only", "two_layers", "no_msg_skip", "no_layer_skip", "no_skip",
          "no_distance_penalty"};
}

ModelOptions ablation_options(const std::string& name, const ModelOptions& base) {
  ModelOptions o = base;
  if (name == "full") {
  } else if (name == "temporal_only") {
    o.temporal_only = true;
    o.semantic_only = false;
    o.distance_penalty = true;
  } else if (name == "semantic_only") {
    o.semantic_only = true;
    o.temporal_only = false;
  } else if (name == "two_layers") {
    o.layers = 2;
  } else if (name == "no_msg_skip") {
    o.message_skip = false;
  } else if (name == "no_layer_skip") {
    o.layer_skip = false;
  } else if (name == "no_skip") {
    o.message_skip = false;
    o.layer_skip = false;
  } else if (name == "no_distance_penalty") {
    if (o.temporal_only) throw InputError("no_distance_penalty cannot be combined with temporal_only");
    o.distance_penalty = false;
  } else {
    throw InputError("unknown ablation '" + name + "'");
  }
  o.validate();
  return o;
}

AblationResult run_ablation(const std::string& name, const Dataset& dataset, const TrainConfig& base) {
  TrainConfig cfg = base;
  cfg.model = ablation_options(name, base.model);
  AblationResult out;
  out.name = name;
  out.training = train_on_dataset(dataset, cfg);
  CernScorer scorer(out.training.params, out.training.options, name);
  const FeatureScaler& scaler = out.training.params.scaler;
  out.val = evaluate(scorer, prepare_split(dataset, Split::kVal, scaler, cfg.model.premise), "val");
  out.test = evaluate(scorer, prepare_split(dataset, Split::kTest, scaler, cfg.model.premise), "test");
  return out;
}

std::string report_to_json(const EvalReport& r) {
  json j;
  j["format_version"] = 1;
  j["kind"] = "eval_report";
  j["model"] = r.model;
  j["split"] = r.split;
  j["accuracy"] = r.accuracy;
  j["all_hit_accuracy"] = r.all_hit_accuracy;
  j["random_expectation"] = r.random_expectation;
  j["instances"] = r.instances;
  j["config_fingerprint"] = r.config_fingerprint;
  json pv = json::array();
  for (const auto& v : r.per_video) pv.push_back({{"video_id", v.video_id}, {"instances", v.instances}, {"correct", v.correct}});
  j["per_video"] = std::move(pv);
  json det = json::array();
  for (const auto& d : r.details)
    det.push_back({d.video_id, d.target_event_id, d.predicted_event_id, d.premise_count, d.trigger_count, d.correct});
  j["details"] = std::move(det);
  return j.dump(1) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("report is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1)
      throw InputError("unsupported report format_version " + j.at("format_version").dump());
    if (j.at("kind").get<std::string>() != "eval_report") throw InputError("not an eval_report");
    EvalReport r;
    r.model = j.at("model").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.accuracy = j.at("accuracy").get<double>();
    r.all_hit_accuracy = j.at("all_hit_accuracy").get<double>();
    r.random_expectation = j.at("random_expectation").get<double>();
    r.instances = j.at("instances").get<int>();
    r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    for (const auto& v : j.at("per_video"))
      r.per_video.push_back({v.at("video_id").get<int>(), v.at("instances").get<int>(), v.at("correct").get<int>()});
    for (const auto& d : j.at("details")) {
      InstanceResult x;
      x.video_id = d.at(0).get<int>();
      x.target_event_id = d.at(1).get<int>();
      x.predicted_event_id = d.at(2).get<int>();
      x.premise_count = d.at(3).get<int>();
      x.trigger_count = d.at(4).get<int>();
      x.correct = d.at(5).get<bool>();
      r.details.push_back(x);
    }
    return r;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed report: ") + e.what());
  }
}

std::string reports_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "model,split,accuracy,all_hit_accuracy,random_expectation,instances,config_fingerprint\n";
  char buf[64];
  for (const auto& r : reports) {
    os << r.model << ',' << r.split;
    for (double x : {r.accuracy, r.all_hit_accuracy, r.random_expectation}) {
      std::snprintf(buf, sizeof buf, ",%.4f", x);
      os << buf;
    }
    os << ',' << r.instances << ',' << r.config_fingerprint << '\n';
  }
  return os.str();
}

std::string fingerprint(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace abduct
