#include "twtoa/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <vector>

#include "twtoa/errors.hpp"

namespace twtoa
{

namespace
{

std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
  {
    return "";
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s)
{
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
  {
    out.push_back(trim(item));
  }
  return out;
}

double to_double(const std::string& key, const std::string& v)
{
  try
  {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size())
    {
      return x;
    }
  }
  catch (const std::exception&)
  {
  }
  throw ParseError("config key '" + key + "': bad number '" + v + "'");
}

long long to_int(const std::string& key, const std::string& v)
{
  try
  {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used == v.size())
    {
      return x;
    }
  }
  catch (const std::exception&)
  {
  }
  throw ParseError("config key '" + key + "': bad integer '" + v + "'");
}

std::vector<double> to_doubles(const std::string& key, const std::string& v)
{
  std::vector<double> out;
  for (const std::string& item : split(v))
  {
    out.push_back(to_double(key, item));
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v)
{
  if (v == "true" || v == "1")
  {
    return true;
  }
  if (v == "false" || v == "0")
  {
    return false;
  }
  throw ParseError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::string fmt(double x)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string join(const std::vector<double>& xs)
{
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i)
  {
    out += (i ? ", " : "") + fmt(xs[i]);
  }
  return out;
}

using Setter = std::function<void(CampaignConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters()
{
  static const std::map<std::string, Setter> table{
      {"an_edge", [](auto& c, auto& k, auto& v) { c.an_edge = to_double(k, v); }},
      {"ud_edge", [](auto& c, auto& k, auto& v) { c.ud_edge = to_double(k, v); }},
      {"center",
       [](auto& c, auto& k, auto& v) {
         const auto xs = to_doubles(k, v);
         if (xs.size() != 3)
         {
           throw ParseError("config key 'center': expected 3 values");
         }
         c.center = Eigen::Vector3d(xs[0], xs[1], xs[2]);
       }},
      {"delay_step", [](auto& c, auto& k, auto& v) { c.delay_step = to_double(k, v); }},
      {"c", [](auto& c, auto& k, auto& v) { c.c = to_double(k, v); }},
      {"max_offset", [](auto& c, auto& k, auto& v) { c.max_offset = to_double(k, v); }},
      {"max_drift", [](auto& c, auto& k, auto& v) { c.max_drift = to_double(k, v); }},
      {"max_speed", [](auto& c, auto& k, auto& v) { c.max_speed = to_double(k, v); }},
      {"noise_grid", [](auto& c, auto& k, auto& v) { c.noise_grid = to_doubles(k, v); }},
      {"speeds", [](auto& c, auto& k, auto& v) { c.speeds = to_doubles(k, v); }},
      {"sweep_noise", [](auto& c, auto& k, auto& v) { c.sweep_noise = to_double(k, v); }},
      {"runs", [](auto& c, auto& k, auto& v) { c.runs = static_cast<int>(to_int(k, v)); }},
      {"seed",
       [](auto& c, auto& k, auto& v) {
         const long long s = to_int(k, v);
         if (s < 0)
         {
           throw ParseError("config key 'seed': must be >= 0");
         }
         c.seed = static_cast<std::uint64_t>(s);
       }},
      {"methods",
       [](auto& c, auto&, auto& v) {
         c.methods.clear();
         for (const std::string& name : split(v))
         {
           c.methods.push_back(parse_method(name));
         }
       }},
      {"threads", [](auto& c, auto& k, auto& v) { c.threads = static_cast<int>(to_int(k, v)); }},
      {"timing", [](auto& c, auto& k, auto& v) { c.timing = to_bool(k, v); }},
      {"ipm.max_iter", [](auto& c, auto& k, auto& v) { c.ipm.max_iter = static_cast<int>(to_int(k, v)); }},
      {"ipm.tol_gap", [](auto& c, auto& k, auto& v) { c.ipm.tol_gap = to_double(k, v); }},
      {"ipm.tol_feas", [](auto& c, auto& k, auto& v) { c.ipm.tol_feas = to_double(k, v); }},
      {"ipm.step_fraction", [](auto& c, auto& k, auto& v) { c.ipm.step_fraction = to_double(k, v); }},
      {"gn.max_iter", [](auto& c, auto& k, auto& v) { c.gn.max_iter = static_cast<int>(to_int(k, v)); }},
      {"gn.tol", [](auto& c, auto& k, auto& v) { c.gn.tol = to_double(k, v); }},
  };
  return table;
}

}  // namespace

CampaignConfig parse_config(std::istream& in, const CampaignConfig& base)
{
  CampaignConfig config = base;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line))
  {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
    {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty())
    {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
    {
      throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end())
    {
      throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    it->second(config, key, value);
  }
  return config;
}

CampaignConfig load_config(const std::string& path, const CampaignConfig& base)
{
  std::ifstream f(path);
  if (!f)
  {
    throw Error("cannot open config '" + path + "'");
  }
  return parse_config(f, base);
}

void print_config(const CampaignConfig& config, std::ostream& out)
{
  std::string methods;
  for (std::size_t i = 0; i < config.methods.size(); ++i)
  {
    methods += std::string(i ? ", " : "") + to_string(config.methods[i]);
  }
  out << "# geometry (meters)\n"
      << "an_edge = " << fmt(config.an_edge) << "\n"
      << "ud_edge = " << fmt(config.ud_edge) << "\n"
      << "center = " << join({config.center(0), config.center(1), config.center(2)}) << "\n"
      << "# anchor i replies at delay_step * i seconds\n"
      << "delay_step = " << fmt(config.delay_step) << "\n"
      << "c = " << fmt(config.c) << "\n"
      << "# priors: b ~ U(0, max_offset) s, w ~ U(-max_drift, max_drift), |v| ~ U(0, max_speed) m/s\n"
      << "max_offset = " << fmt(config.max_offset) << "\n"
      << "max_drift = " << fmt(config.max_drift) << "\n"
      << "max_speed = " << fmt(config.max_speed) << "\n"
      << "# campaign\n"
      << "noise_grid = " << join(config.noise_grid) << "\n"
      << "speeds = " << join(config.speeds) << "\n"
      << "sweep_noise = " << fmt(config.sweep_noise) << "\n"
      << "runs = " << config.runs << "\n"
      << "seed = " << config.seed << "\n"
      << "methods = " << methods << "\n"
      << "threads = " << config.threads << "\n"
      << "timing = " << (config.timing ? "true" : "false") << "\n"
      << "# solvers\n"
      << "ipm.max_iter = " << config.ipm.max_iter << "\n"
      << "ipm.tol_gap = " << fmt(config.ipm.tol_gap) << "\n"
      << "ipm.tol_feas = " << fmt(config.ipm.tol_feas) << "\n"
      << "ipm.step_fraction = " << fmt(config.ipm.step_fraction) << "\n"
      << "gn.max_iter = " << config.gn.max_iter << "\n"
      << "gn.tol = " << fmt(config.gn.tol) << "\n";
}

}  // namespace twtoa
