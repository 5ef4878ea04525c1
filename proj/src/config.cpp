#include "chc/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace chc {

namespace {

std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep)
{
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    out.push_back(trim(item));
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text)
{
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty())
    throw ConfigError("key '" + key + "': cannot parse '" + text + "' as a number");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text)
{
  if (text == "true" || text == "1")
    return true;
  if (text == "false" || text == "0")
    return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + text + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text)
{
  std::vector<T> out;
  for (const auto& item : split(text, ','))
    out.push_back(parse_number<T>(key, item));
  if (out.empty())
    throw ConfigError("key '" + key + "': empty list");
  return out;
}

template <class T>
std::string join(const std::vector<T>& v)
{
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i)
    os << (i ? "," : "") << v[i];
  return os.str();
}

}  // namespace

void apply_setting(StudyConfig& cfg, const std::string& key, const std::string& value)
{
  if (key == "study")
    cfg.study = value;
  else if (key == "domain") {
    if (value == "interval")
      cfg.domain.kind = DomainKind::interval;
    else if (value == "rectangle")
      cfg.domain.kind = DomainKind::rectangle;
    else
      throw ConfigError("key 'domain': expected interval or rectangle, got '" + value + "'");
  } else if (key == "L" || key == "Lx")
    cfg.domain.lx = parse_number<double>(key, value);
  else if (key == "Ly")
    cfg.domain.ly = parse_number<double>(key, value);
  else if (key == "n")
    cfg.n = parse_number<int>(key, value);
  else if (key == "T")
    cfg.T = parse_number<double>(key, value);
  else if (key == "N")
    cfg.N = parse_number<std::size_t>(key, value);
  else if (key == "levels")
    cfg.levels = parse_number<std::size_t>(key, value);
  else if (key == "M" || key == "samples")
    cfg.samples = parse_number<std::size_t>(key, value);
  else if (key == "workers")
    cfg.workers = parse_number<unsigned>(key, value);
  else if (key == "seed")
    cfg.noise.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "r")
    cfg.noise.r = parse_number<double>(key, value);
  else if (key == "sigma")
    cfg.noise.sigma = parse_number<double>(key, value);
  else if (key == "modes")
    cfg.noise.modes = parse_number<std::size_t>(key, value);
  else if (key == "linear")
    cfg.linear = parse_bool(key, value);
  else if (key == "potential") {
    const auto c = parse_list<double>(key, value);
    if (c.size() != 5)
      throw ConfigError("key 'potential': expected 5 coefficients, got " + std::to_string(c.size()));
    std::copy(c.begin(), c.end(), cfg.potential.begin());
  } else if (key == "newton_rtol")
    cfg.stepper.newton_rtol = parse_number<double>(key, value);
  else if (key == "newton_atol")
    cfg.stepper.newton_atol = parse_number<double>(key, value);
  else if (key == "newton_max_iters")
    cfg.stepper.max_newton_iters = parse_number<int>(key, value);
  else if (key == "quad_degree")
    cfg.quad_degree = parse_number<int>(key, value);
  else if (key == "x0") {
    cfg.x0.clear();
    for (const auto& item : split(value, ',')) {
      const auto parts = split(item, ':');
      if (parts.size() != 2)
        throw ConfigError("key 'x0': expected mode:coefficient pairs, got '" + item + "'");
      cfg.x0.emplace_back(parse_number<std::size_t>(key, parts[0]), parse_number<double>(key, parts[1]));
    }
  } else if (key == "sweep_n")
    cfg.sweep_n = parse_list<int>(key, value);
  else if (key == "sweep_N")
    cfg.sweep_N = parse_list<int>(key, value);
  else if (key == "fixed_n")
    cfg.fixed_n = parse_number<int>(key, value);
  else if (key == "fixed_N")
    cfg.fixed_N = parse_number<std::size_t>(key, value);
  else if (key == "t_eval")
    cfg.t_eval = parse_number<double>(key, value);
  else if (key == "holder_gammas")
    cfg.holder_gammas = parse_list<double>(key, value);
  else if (key == "holder_refinements")
    cfg.holder_refinements = parse_number<std::size_t>(key, value);
  else
    throw ConfigError("unknown key '" + key + "'");
}

void validate(const StudyConfig& cfg)
{
  const auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (cfg.N < 1)
    fail("N must be ≥ 1");
  if (!(cfg.T > 0.0))
    fail("T must be > 0");
  if (cfg.n < 2)
    fail("n must be ≥ 2");
  if (!(cfg.domain.lx > 0.0))
    fail("L must be > 0");
  if (cfg.domain.kind == DomainKind::rectangle && !(cfg.domain.ly > 0.0))
    fail("Ly must be > 0 for a rectangle");
  if (cfg.samples < 1)
    fail("M must be ≥ 1");
  if (!(cfg.noise.sigma >= 0.0))
    fail("sigma must be ≥ 0");
  if (!(cfg.potential[4] > 0.0))
    fail("the quartic potential coefficient must be > 0");
  if (cfg.stepper.max_newton_iters < 1)
    fail("newton_max_iters must be ≥ 1");
  for (int v : cfg.sweep_n)
    if (v < 2)
      fail("sweep_n entries must be ≥ 2");
  for (int v : cfg.sweep_N)
    if (v < 1)
      fail("sweep_N entries must be ≥ 1");
  if (cfg.fixed_N < 1)
    fail("fixed_N must be ≥ 1");
  if (cfg.fixed_n < 2)
    fail("fixed_n must be ≥ 2");
}

StudyConfig parse_config(std::istream& is)
{
  StudyConfig cfg;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.rfind("manifest.", 0) == 0)
      continue;  // run metadata written next to the config keys
    if (!seen.insert(key).second)
      throw ConfigError("duplicate key '" + key + "'");
    apply_setting(cfg, key, value);
  }
  for (const char* required : {"domain", "T", "study"})
    if (!seen.count(required))
      throw ConfigError(std::string("missing required key '") + required + "'");
  validate(cfg);
  return cfg;
}

StudyConfig parse_config_file(const std::string& path)
{
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(is);
}

std::uint64_t resolve_seed(const std::string& flag_value)
{
  if (!flag_value.empty())
    return parse_number<std::uint64_t>("seed", flag_value);
  if (const char* env = std::getenv("CHC_SEED"); env && *env)
    return parse_number<std::uint64_t>("CHC_SEED", env);
  return 42;
}

void write_config(std::ostream& os, const StudyConfig& cfg)
{
  const auto flags = os.flags();
  const auto precision = os.precision();
  os << std::setprecision(17);
  os << "study = " << cfg.study << '\n'
     << "domain = " << (cfg.domain.kind == DomainKind::interval ? "interval" : "rectangle") << '\n'
     << "L = " << cfg.domain.lx << '\n';
  if (cfg.domain.kind == DomainKind::rectangle)
    os << "Ly = " << cfg.domain.ly << '\n';
  os << "n = " << cfg.n << '\n'
     << "T = " << cfg.T << '\n'
     << "N = " << cfg.N << '\n'
     << "levels = " << cfg.levels << '\n'
     << "M = " << cfg.samples << '\n'
     << "seed = " << cfg.noise.seed << '\n'
     << "r = " << cfg.noise.r << '\n'
     << "sigma = " << cfg.noise.sigma << '\n'
     << "modes = " << cfg.noise.modes << '\n'
     << "linear = " << (cfg.linear ? "true" : "false") << '\n'
     << "potential = " << join(std::vector<double>(cfg.potential.begin(), cfg.potential.end())) << '\n'
     << "newton_rtol = " << cfg.stepper.newton_rtol << '\n'
     << "newton_atol = " << cfg.stepper.newton_atol << '\n'
     << "newton_max_iters = " << cfg.stepper.max_newton_iters << '\n'
     << "quad_degree = " << cfg.quad_degree << '\n';
  os << "x0 = ";
  for (std::size_t i = 0; i < cfg.x0.size(); ++i)
    os << (i ? "," : "") << cfg.x0[i].first << ':' << cfg.x0[i].second;
  os << '\n'
     << "sweep_n = " << join(cfg.sweep_n) << '\n'
     << "sweep_N = " << join(cfg.sweep_N) << '\n'
     << "fixed_n = " << cfg.fixed_n << '\n'
     << "fixed_N = " << cfg.fixed_N << '\n'
     << "t_eval = " << cfg.t_eval << '\n'
     << "holder_gammas = " << join(cfg.holder_gammas) << '\n'
     << "holder_refinements = " << cfg.holder_refinements << '\n';
  os.flags(flags);
  os.precision(precision);
}

void write_manifest(std::ostream& os, const RunManifest& manifest)
{
  os << "manifest.version = " << manifest.version << '\n' << "manifest.timestamp = " << manifest.timestamp << '\n';
  for (std::size_t i = 0; i < manifest.outputs.size(); ++i)
    os << "manifest.output" << i << " = " << manifest.outputs[i] << '\n';
  write_config(os, manifest.config);
}

}  // namespace chc
