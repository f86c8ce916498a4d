#include "maips/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>

#include "maips/errors.hpp"

namespace maips {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

pt::ptree::path_type path_of(const std::string &key) { return {key, '.'}; }

template <class T> T parse_number(const std::string &key, const std::string &text) {
  const std::string t = trim(text);
  T value{};
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError("config: '" + key + "' = '" + text + "' is not a valid number");
  }
  return value;
}

} // namespace

Config Config::from_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

Config Config::from_string(const std::string &text) {
  Config c;
  std::istringstream in(text);
  try {
    pt::read_ini(in, c.tree_);
  } catch (const pt::ini_parser_error &e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto &section : c.tree_) {
    if (section.second.empty() && !section.second.data().empty()) {
      throw ConfigError("config: key '" + section.first + "' outside a section");
    }
  }
  return c;
}

void Config::merge(const Config &other, bool strict) {
  for (const auto &key : other.keys()) {
    if (strict && !has(key)) throw ConfigError("config: unknown key '" + key + "'");
    set(key, other.get_string(key));
  }
}

void Config::set(const std::string &key, const std::string &value) {
  if (key.find('.') == std::string::npos) {
    throw ConfigError("config: key '" + key + "' must be written as section.key");
  }
  tree_.put(path_of(key), trim(value));
}

void Config::apply_override(const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  }
  const std::string key = trim(assignment.substr(0, eq));
  if (!has(key)) throw ConfigError("config: unknown key '" + key + "'");
  set(key, assignment.substr(eq + 1));
}

void Config::erase_section(const std::string &section) { tree_.erase(section); }

bool Config::has(const std::string &key) const {
  return static_cast<bool>(tree_.get_child_optional(path_of(key)));
}

std::string Config::get_string(const std::string &key) const {
  const auto v = tree_.get_optional<std::string>(path_of(key));
  if (!v) throw ConfigError("config: missing key '" + key + "'");
  return *v;
}

double Config::get_double(const std::string &key) const {
  return parse_number<double>(key, get_string(key));
}

long long Config::get_int(const std::string &key) const {
  return parse_number<long long>(key, get_string(key));
}

std::uint64_t Config::get_u64(const std::string &key) const {
  return parse_number<std::uint64_t>(key, get_string(key));
}

bool Config::get_bool(const std::string &key) const {
  const std::string v = trim(get_string(key));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: '" + key + "' = '" + v + "' is not a boolean");
}

std::vector<std::string> Config::get_strings(const std::string &key) const {
  std::vector<std::string> out;
  std::stringstream ss(get_string(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> Config::get_doubles(const std::string &key) const {
  std::vector<double> out;
  for (const auto &s : get_strings(key)) out.push_back(parse_number<double>(key, s));
  return out;
}

std::vector<long long> Config::get_ints(const std::string &key) const {
  std::vector<long long> out;
  for (const auto &s : get_strings(key)) out.push_back(parse_number<long long>(key, s));
  return out;
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> out;
  for (const auto &section : tree_) {
    for (const auto &kv : section.second) out.push_back(section.first + "." + kv.first);
  }
  return out;
}

void Config::write(std::ostream &out) const { pt::write_ini(out, tree_); }

void Config::write_file(const std::filesystem::path &path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  write(out);
}

Config default_config() {
  return Config::from_string(R"ini(
[run]
experiment = exp1
seed = 20240501

[exp1]
sigma = 0.1
m0 = 0.8
particles = 10
burn_in = 1000
iterations = 10000
methods = aldi,svgd,cbs
aldi_h = 0.0725
aldi_gamma = 0
svgd_h = 0.0001
svgd_bandwidth = 0.01
cbs_h = 0.05
cbs_gamma = 0
hist_lo = -3
hist_hi = 3
hist_bins = 60

[exp2]
particles = 100
burn_in = 1000
iterations = 10000
replicas = 10
gamma = 0.001
target_rate = 0.5
tune_epochs = 100
tune_epoch_length = 50
tune_c0 = 3
aldi_h0 = 0.01
pmala_h0 = 0.001
block_sizes = 50,25
cores = 1,20,50,100
max_lag = 200
extra_gammas =
mse_methods =
mse_rates = 0.3,0.5,0.7,0.9

[exp3]
mesh_power = 6
observations = 64
basis_terms = 10
tau = 2
noise_std = 0.01
problem_seed = 2024
problem_file =
particles = 100
burn_in = 1000
iterations = 10000
gamma = 0.01
target_rate = 0.5
tune_epochs = 40
tune_epoch_length = 25
tune_c0 = 3
aldi_h0 = 0.01
pmala_h0 = 0.0001
methods = aldi-ew,aldi-pw,pmala-pw

[bias]
nodes = 101
triangular_h = 0.25
uniform_h = 0.25
uniform_gamma = 0.01
tolerance = 1e-13
)ini");
}

} // namespace maips
