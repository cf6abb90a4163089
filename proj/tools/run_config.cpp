#include "run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "rcm/errors.hpp"

namespace rcm::cli {
namespace {

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  const auto s = trim(text);
  T value{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw ConfigError("cannot parse '" + text + "' for key " + key);
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const auto s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("cannot parse '" + text + "' as a boolean for key " + key);
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, item));
  if (out.empty()) throw ConfigError("empty list for key " + key);
  return out;
}

std::string format_double(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

template <class M>
Field num_field(std::string key, std::function<M&(RunConfig&)> ref) {
  return {key,
          [key, ref](RunConfig& c, const std::string& v) { ref(c) = parse_number<M>(key, v); },
          [ref](const RunConfig& c) {
            const M v = ref(const_cast<RunConfig&>(c));
            if constexpr (std::is_floating_point_v<M>) {
              return format_double(v);
            } else {
              return std::to_string(v);
            }
          }};
}

Field bool_field(std::string key, std::function<bool&(RunConfig&)> ref) {
  return {key, [key, ref](RunConfig& c, const std::string& v) { ref(c) = parse_bool(key, v); },
          [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

Field string_field(std::string key, std::function<std::string&(RunConfig&)> ref) {
  return {key, [ref](RunConfig& c, const std::string& v) { ref(c) = trim(v); },
          [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); }};
}

Field path_field(std::string key, std::function<std::filesystem::path&(RunConfig&)> ref) {
  return {key, [ref](RunConfig& c, const std::string& v) { ref(c) = trim(v); },
          [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)).string(); }};
}

void add_denoiser_fields(std::vector<Field>& f, const std::string& section, DenoiserConfig RunConfig::*member) {
  f.push_back(num_field<int>(section + ".base_width", [member](RunConfig& c) -> int& { return (c.*member).base_width; }));
  f.push_back({section + ".channel_multipliers",
               [section, member](RunConfig& c, const std::string& v) {
                 (c.*member).channel_multipliers = parse_int_list(section + ".channel_multipliers", v);
               },
               [member](const RunConfig& c) {
                 std::string s;
                 for (int m : (c.*member).channel_multipliers) s += (s.empty() ? "" : ",") + std::to_string(m);
                 return s;
               }});
  f.push_back(
      num_field<int>(section + ".fourier_bands", [member](RunConfig& c) -> int& { return (c.*member).fourier_bands; }));
  f.push_back(num_field<int>(section + ".groups", [member](RunConfig& c) -> int& { return (c.*member).groups; }));
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(num_field<std::uint64_t>("run.seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; }));

    f.push_back(num_field<double>("schedule.sigma_min", [](RunConfig& c) -> double& { return c.schedule.sigma_min; }));
    f.push_back(num_field<double>("schedule.sigma_max", [](RunConfig& c) -> double& { return c.schedule.sigma_max; }));
    f.push_back(
        num_field<double>("schedule.sigma_data", [](RunConfig& c) -> double& { return c.schedule.sigma_data; }));
    f.push_back(num_field<int>("schedule.n_levels", [](RunConfig& c) -> int& { return c.schedule.n_levels; }));
    f.push_back(num_field<double>("schedule.rho", [](RunConfig& c) -> double& { return c.schedule.rho; }));

    f.push_back(num_field<double>("sampler.tau", [](RunConfig& c) -> double& { return c.sampler.tau; }));
    f.push_back(num_field<double>("sampler.p_large", [](RunConfig& c) -> double& { return c.sampler.p_large; }));
    f.push_back(num_field<int>("sampler.k_max", [](RunConfig& c) -> int& { return c.sampler.k_max; }));

    add_denoiser_fields(f, "reflectance", &RunConfig::reflectance);
    add_denoiser_fields(f, "illumination", &RunConfig::illumination);

    auto t = [](auto member) { return [member](RunConfig& c) -> auto& { return c.train.*member; }; };
    f.push_back(num_field<double>("train.lambda_consist", t(&TrainConfig::lambda_consist)));
    f.push_back(num_field<double>("train.lambda_fixed", t(&TrainConfig::lambda_fixed)));
    f.push_back(num_field<double>("train.learning_rate", t(&TrainConfig::learning_rate)));
    f.push_back(num_field<double>("train.beta1", t(&TrainConfig::beta1)));
    f.push_back(num_field<double>("train.beta2", t(&TrainConfig::beta2)));
    f.push_back(num_field<double>("train.adam_eps", t(&TrainConfig::adam_eps)));
    f.push_back(num_field<double>("train.weight_decay", t(&TrainConfig::weight_decay)));
    f.push_back(num_field<std::int64_t>("train.iterations", t(&TrainConfig::iterations)));
    f.push_back(num_field<int>("train.batch_size", t(&TrainConfig::batch_size)));
    f.push_back(num_field<int>("train.patch_size", t(&TrainConfig::patch_size)));
    f.push_back(num_field<double>("train.flip_prob", t(&TrainConfig::flip_prob)));
    f.push_back(num_field<std::int64_t>("train.checkpoint_every", t(&TrainConfig::checkpoint_every)));
    f.push_back(bool_field("train.noise_emphasis", t(&TrainConfig::noise_emphasis)));

    f.push_back(num_field<int>("data.count", [](RunConfig& c) -> int& { return c.data.count; }));
    f.push_back(num_field<int>("data.size", [](RunConfig& c) -> int& { return c.data.size; }));
    f.push_back(num_field<double>("data.gamma", [](RunConfig& c) -> double& { return c.data.degradation.gamma; }));
    f.push_back(num_field<double>("data.gain", [](RunConfig& c) -> double& { return c.data.degradation.gain; }));
    f.push_back(
        num_field<double>("data.noise_std", [](RunConfig& c) -> double& { return c.data.degradation.noise_std; }));
    f.push_back(num_field<double>("data.delta", [](RunConfig& c) -> double& { return c.data.delta; }));

    f.push_back(bool_field("enhance.ema", [](RunConfig& c) -> bool& { return c.enhance.ema; }));
    f.push_back(string_field("enhance.suffix", [](RunConfig& c) -> std::string& { return c.enhance.suffix; }));

    f.push_back(num_field<std::int64_t>("inspect.draws", [](RunConfig& c) -> std::int64_t& { return c.inspect.draws; }));
    f.push_back(num_field<int>("inspect.bins", [](RunConfig& c) -> int& { return c.inspect.bins; }));

    using P = std::filesystem::path;
    f.push_back(path_field("paths.data", [](RunConfig& c) -> P& { return c.paths.data; }));
    f.push_back(path_field("paths.out", [](RunConfig& c) -> P& { return c.paths.out; }));
    f.push_back(path_field("paths.checkpoints", [](RunConfig& c) -> P& { return c.paths.checkpoints; }));
    f.push_back(path_field("paths.input", [](RunConfig& c) -> P& { return c.paths.input; }));
    f.push_back(path_field("paths.enhanced", [](RunConfig& c) -> P& { return c.paths.enhanced; }));
    f.push_back(path_field("paths.reference", [](RunConfig& c) -> P& { return c.paths.reference; }));
    return f;
  }();
  return table;
}

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown key '" + key + "'");
}

}  // namespace

void RunConfig::validate() const {
  schedule.make();
  sampler.validate();
  reflectance.validate();
  illumination.validate();
  train.validate();
  if (reflectance.in_channels != 6 || reflectance.out_channels != 3) {
    throw InvalidArgument("reflectance model must map 6 input channels to 3");
  }
  if (illumination.in_channels != 4 || illumination.out_channels != 1) {
    throw InvalidArgument("illumination model must map 4 input channels to 1");
  }
  if (data.count < 1) throw InvalidArgument("data.count must be >= 1");
  if (data.delta <= 0.0 || data.delta >= 1.0) throw InvalidArgument("data.delta must lie in (0, 1)");
  if (inspect.draws < 1 || inspect.bins < 1) throw InvalidArgument("inspect.draws and inspect.bins must be >= 1");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

void set_value(RunConfig& config, const std::string& key, const std::string& value) {
  find_field(key).set(config, value);
}

std::string get_value(const RunConfig& config, const std::string& key) { return find_field(key).get(config); }

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(path.string() + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' must belong to a [section]");
    for (const auto& [key, node] : body) set_value(config, section + "." + key, node.data());
  }
}

void write_manifest(std::ostream& os, const RunConfig& config, const std::string& command) {
  os << "; rcm " << command << " resolved configuration\n";
  std::string section;
  for (const auto& f : fields()) {
    if (f.key == "paths.out") continue;
    const auto dot = f.key.find('.');
    const auto sec = f.key.substr(0, dot);
    if (sec != section) {
      os << (section.empty() ? "" : "\n") << "[" << sec << "]\n";
      section = sec;
    }
    os << f.key.substr(dot + 1) << " = " << f.get(config) << "\n";
  }
}

void write_manifest(const std::filesystem::path& path, const RunConfig& config, const std::string& command) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest " + path.string());
  write_manifest(os, config, command);
  if (!os) throw IoError("failed writing manifest " + path.string());
}

}  // namespace rcm::cli
