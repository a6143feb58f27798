#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vflsim/errors.hpp"
#include "vflsim/scheduler.hpp"
#include "vflsim/zoo.hpp"

namespace vflsim {

enum class Framework { kCascaded, kFoo, kZoo, kSynZoo };
enum class DatasetKind { kSynthetic, kCsv };

/// One row of the metrics stream; written to metrics.csv with the header
/// iteration,epoch,train_loss,train_acc,test_loss,test_acc,max_delay,wall_ms
/// wall_ms is excluded from all determinism guarantees.
struct MetricsRecord {
  std::int64_t iteration = 0;
  double epoch = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
  std::int64_t max_delay = 0;
  double wall_ms = 0.0;
};

struct RunConfig {
  Framework framework = Framework::kCascaded;
  bool framework_set = false;

  DatasetKind dataset = DatasetKind::kSynthetic;
  int synthetic_n = 1000;
  int synthetic_test_n = 200;
  int synthetic_features = 20;
  int synthetic_classes = 2;
  double synthetic_separation = 3.0;
  std::string csv_train;
  std::string csv_test;
  bool csv_has_header = false;

  int clients = 2;
  std::vector<int> client_hidden;        // client net: shard -> hidden... -> embed_dim
  std::vector<int> server_hidden = {128};  // server net: sum(embed) -> hidden... -> C
  int embed_dim = 128;

  double eta0 = 0.010;
  double eta_m = 0.010;
  double mu = 0.001;
  double lambda = 0.0;
  zoo::DirectionKind dist = zoo::DirectionKind::kUnitSphere;

  sched::PolicyKind policy = sched::PolicyKind::kIidCategorical;
  std::vector<double> policy_p;  // empty = uniform
  std::int64_t tau_max = 0;

  std::int64_t iterations = 1000;
  int batch_size = 64;
  int eval_every = 100;
  std::uint64_t seed = 1;

  std::int64_t attack_trials = 20000;

  bool operator==(const RunConfig&) const = default;

  sched::ActivationPolicy activation_policy() const {
    std::vector<double> p = policy_p;
    if (p.empty()) p.assign(clients, 1.0 / clients);
    switch (policy) {
      case sched::PolicyKind::kRoundRobin:
        return sched::ActivationPolicy::round_robin(clients);
      case sched::PolicyKind::kIidCategorical:
        return sched::ActivationPolicy::iid(std::move(p));
      case sched::PolicyKind::kBoundedForcing:
        return sched::ActivationPolicy::bounded_forcing(std::move(p), tau_max);
    }
    throw config_error("bad policy kind");
  }
};

namespace detail {

inline std::string trim(std::string s) {
  auto issp = [](unsigned char c) { return std::isspace(c); };
  while (!s.empty() && issp(s.front())) s.erase(s.begin());
  while (!s.empty() && issp(s.back())) s.pop_back();
  return s;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw config_error("config: bad numeric value '" + v + "' for " + key);
  }
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    std::int64_t i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw config_error("config: expected integer for " + key + ", got '" + v +
                       "'");
  }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    std::uint64_t i = std::stoull(v, &used);
    if (used != v.size() || (!v.empty() && v[0] == '-'))
      throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw config_error("config: expected unsigned integer for " + key +
                       ", got '" + v + "'");
  }
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& key, const std::string& v, F f) {
  std::vector<T> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ','))
    out.push_back(static_cast<T>(f(key, trim(tok))));
  return out;
}

}  // namespace detail

inline const char* to_string(Framework f) {
  switch (f) {
    case Framework::kCascaded: return "cascaded";
    case Framework::kFoo: return "foo";
    case Framework::kZoo: return "zoo";
    case Framework::kSynZoo: return "syn_zoo";
  }
  return "?";
}

/// Validates invariants shared by all runners. Zero learning rates are
/// allowed (they freeze the party); negative ones are not.
inline void validate(const RunConfig& c) {
  if (!c.framework_set) throw config_error("config: framework is mandatory");
  if (c.eta0 < 0.0 || c.eta_m < 0.0)
    throw config_error("config: eta0/eta_m must be >= 0");
  if (c.framework != Framework::kFoo && !(c.mu > 0.0))
    throw config_error("config: mu must be > 0 for ZOO-bearing frameworks");
  if (c.lambda < 0.0) throw config_error("config: lambda must be >= 0");
  if (c.clients < 1) throw config_error("config: clients must be >= 1");
  if (c.embed_dim < 1) throw config_error("config: embed_dim must be >= 1");
  for (int h : c.client_hidden)
    if (h < 1) throw config_error("config: client_hidden entries must be >= 1");
  for (int h : c.server_hidden)
    if (h < 1) throw config_error("config: server_hidden entries must be >= 1");
  if (c.iterations < 0) throw config_error("config: iterations must be >= 0");
  if (c.batch_size < 1) throw config_error("config: batch_size must be >= 1");
  if (c.eval_every < 1) throw config_error("config: eval_every must be >= 1");
  if (c.dataset == DatasetKind::kSynthetic) {
    if (c.synthetic_n < 1 || c.synthetic_test_n < 1 ||
        c.synthetic_features < 1 || c.synthetic_classes < 2)
      throw config_error("config: synthetic dims invalid");
    if (c.synthetic_features < c.clients)
      throw config_error("config: synthetic_features < clients");
  } else if (c.csv_train.empty()) {
    throw config_error("config: csv_train is required for dataset = csv");
  }
  if (!c.policy_p.empty() &&
      static_cast<int>(c.policy_p.size()) != c.clients)
    throw config_error("config: policy_p length must equal clients");
  c.activation_policy();  // validates p and tau_max
  if (c.attack_trials < 1) throw config_error("config: attack_trials must be >= 1");
}

/// Flat `key = value` file; '#' starts a comment; lists are comma-separated.
inline RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(lineno) +
                         ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));

    if (key == "framework") {
      if (value == "cascaded") c.framework = Framework::kCascaded;
      else if (value == "foo") c.framework = Framework::kFoo;
      else if (value == "zoo") c.framework = Framework::kZoo;
      else if (value == "syn_zoo") c.framework = Framework::kSynZoo;
      else throw config_error("config: unknown framework '" + value + "'");
      c.framework_set = true;
    } else if (key == "dataset") {
      if (value == "synthetic") c.dataset = DatasetKind::kSynthetic;
      else if (value == "csv") c.dataset = DatasetKind::kCsv;
      else throw config_error("config: unknown dataset '" + value + "'");
    } else if (key == "synthetic_n") {
      c.synthetic_n = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "synthetic_test_n") {
      c.synthetic_test_n = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "synthetic_features") {
      c.synthetic_features = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "synthetic_classes") {
      c.synthetic_classes = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "synthetic_separation") {
      c.synthetic_separation = detail::parse_double(key, value);
    } else if (key == "csv_train") {
      c.csv_train = value;
    } else if (key == "csv_test") {
      c.csv_test = value;
    } else if (key == "csv_has_header") {
      c.csv_has_header = detail::parse_int(key, value) != 0;
    } else if (key == "clients") {
      c.clients = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "client_hidden") {
      c.client_hidden = detail::parse_list<int>(key, value, detail::parse_int);
    } else if (key == "server_hidden") {
      c.server_hidden = detail::parse_list<int>(key, value, detail::parse_int);
    } else if (key == "embed_dim") {
      c.embed_dim = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "eta0") {
      c.eta0 = detail::parse_double(key, value);
    } else if (key == "eta_m") {
      c.eta_m = detail::parse_double(key, value);
    } else if (key == "mu") {
      c.mu = detail::parse_double(key, value);
    } else if (key == "lambda") {
      c.lambda = detail::parse_double(key, value);
    } else if (key == "dist") {
      if (value == "unit_sphere") c.dist = zoo::DirectionKind::kUnitSphere;
      else if (value == "standard_gaussian")
        c.dist = zoo::DirectionKind::kStandardGaussian;
      else throw config_error("config: unknown dist '" + value + "'");
    } else if (key == "policy") {
      if (value == "iid") c.policy = sched::PolicyKind::kIidCategorical;
      else if (value == "round_robin") c.policy = sched::PolicyKind::kRoundRobin;
      else if (value == "bounded_forcing")
        c.policy = sched::PolicyKind::kBoundedForcing;
      else throw config_error("config: unknown policy '" + value + "'");
    } else if (key == "policy_p") {
      c.policy_p = detail::parse_list<double>(key, value, detail::parse_double);
    } else if (key == "tau_max") {
      c.tau_max = detail::parse_int(key, value);
    } else if (key == "iterations") {
      c.iterations = detail::parse_int(key, value);
    } else if (key == "batch_size") {
      c.batch_size = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "eval_every") {
      c.eval_every = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "seed") {
      c.seed = detail::parse_uint(key, value);
    } else if (key == "attack_trials") {
      c.attack_trials = detail::parse_int(key, value);
    } else {
      throw config_error("config: unknown key '" + key + "'");
    }
  }
  validate(c);
  return c;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out.precision(17);
  auto list_int = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
      s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  out << "framework = " << to_string(c.framework) << "\n";
  out << "dataset = "
      << (c.dataset == DatasetKind::kSynthetic ? "synthetic" : "csv") << "\n";
  out << "synthetic_n = " << c.synthetic_n << "\n";
  out << "synthetic_test_n = " << c.synthetic_test_n << "\n";
  out << "synthetic_features = " << c.synthetic_features << "\n";
  out << "synthetic_classes = " << c.synthetic_classes << "\n";
  out << "synthetic_separation = " << c.synthetic_separation << "\n";
  if (!c.csv_train.empty()) out << "csv_train = " << c.csv_train << "\n";
  if (!c.csv_test.empty()) out << "csv_test = " << c.csv_test << "\n";
  out << "csv_has_header = " << (c.csv_has_header ? 1 : 0) << "\n";
  out << "clients = " << c.clients << "\n";
  out << "client_hidden = " << list_int(c.client_hidden) << "\n";
  out << "server_hidden = " << list_int(c.server_hidden) << "\n";
  out << "embed_dim = " << c.embed_dim << "\n";
  out << "eta0 = " << c.eta0 << "\n";
  out << "eta_m = " << c.eta_m << "\n";
  out << "mu = " << c.mu << "\n";
  out << "lambda = " << c.lambda << "\n";
  out << "dist = "
      << (c.dist == zoo::DirectionKind::kUnitSphere ? "unit_sphere"
                                                    : "standard_gaussian")
      << "\n";
  switch (c.policy) {
    case sched::PolicyKind::kIidCategorical: out << "policy = iid\n"; break;
    case sched::PolicyKind::kRoundRobin: out << "policy = round_robin\n"; break;
    case sched::PolicyKind::kBoundedForcing:
      out << "policy = bounded_forcing\n";
      break;
  }
  if (!c.policy_p.empty()) {
    out << "policy_p = ";
    for (std::size_t i = 0; i < c.policy_p.size(); ++i)
      out << (i ? "," : "") << c.policy_p[i];
    out << "\n";
  }
  if (c.tau_max > 0) out << "tau_max = " << c.tau_max << "\n";
  out << "iterations = " << c.iterations << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  out << "eval_every = " << c.eval_every << "\n";
  out << "seed = " << c.seed << "\n";
  out << "attack_trials = " << c.attack_trials << "\n";
  return out.str();
}

}  // namespace vflsim
