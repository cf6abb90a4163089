#include "commands.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "rcm/dataset.hpp"
#include "rcm/errors.hpp"
#include "rcm/infer.hpp"

namespace rcm::cli {
namespace fs = std::filesystem;

namespace {

fs::path prepare_out_dir(const RunConfig& config, const std::string& command) {
  const auto& out = config.paths.out;
  if (out.empty()) throw InvalidArgument(command + ": an output directory is required (--out)");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw IoError(command + ": cannot create output directory " + out.string());
  write_manifest(out / "manifest.txt", config, command);
  return out;
}

std::ofstream open_csv(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << std::setprecision(17);
  return os;
}

void close_csv(std::ofstream& os, const fs::path& path) {
  os.close();
  if (!os) throw IoError("failed writing " + path.string());
}

std::string zero_padded(std::int64_t v, int width) {
  std::ostringstream os;
  os << std::setw(width) << std::setfill('0') << v;
  return os.str();
}

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const auto& i : items) s += (s.empty() ? "" : ", ") + i;
  return s;
}

std::string stem_without_suffix(const fs::path& p, const std::string& suffix) {
  auto stem = p.stem().string();
  if (!suffix.empty() && stem.size() > suffix.size() && stem.ends_with(suffix)) {
    stem.resize(stem.size() - suffix.size());
  }
  return stem;
}

DenoiserModel load_checkpoint(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw IoError("missing checkpoint " + path.string());
  return DenoiserModel::load(path);
}

void save_pair(const fs::path& dir, const std::string& prefix, const DenoiserModel& r, const DenoiserModel& l) {
  r.save(dir / (prefix + "reflectance.ckpt"));
  l.save(dir / (prefix + "illumination.ckpt"));
}

}  // namespace

void cmd_make_toydata(const RunConfig& config) {
  const auto out = prepare_out_dir(config, "make-toydata");
  std::error_code ec;
  fs::create_directories(out / "low", ec);
  fs::create_directories(out / "normal", ec);
  if (ec) throw IoError("make-toydata: cannot create image directories under " + out.string());
  SeededRng rng(config.seed);
  for (int i = 0; i < config.data.count; ++i) {
    const auto pair = make_toy_pair(rng, config.data.size, config.data.degradation);
    const auto name = "toy_" + zero_padded(i, 4) + ".png";
    write_image(out / "low" / name, pair.low);
    write_image(out / "normal" / name, pair.normal);
  }
}

void cmd_inspect_schedule(const RunConfig& config) {
  const auto out = prepare_out_dir(config, "inspect-schedule");
  const auto schedule = config.schedule.make();
  const auto path = out / "schedule.csv";
  auto os = open_csv(path);
  os << "n,sigma,c_skip,c_out,c_in,snr_weight\n";
  for (int n = 0; n < schedule.n_levels(); ++n) {
    const double s = schedule.level_sigma(n);
    const auto p = schedule.precondition(s);
    os << n << ',' << s << ',' << p.c_skip << ',' << p.c_out << ',' << p.c_in << ',' << schedule.snr_weight(s) << '\n';
  }
  close_csv(os, path);
}

void cmd_inspect_sampler(const RunConfig& config) {
  const auto out = prepare_out_dir(config, "inspect-sampler");
  const auto schedule = config.schedule.make();
  const double lo = std::log(schedule.sigma_min()), hi = std::log(schedule.sigma_max());
  const auto bins = static_cast<std::size_t>(config.inspect.bins);
  const double width = (hi - lo) / static_cast<double>(bins);
  auto bin_of = [&](double sigma) {
    const auto b = static_cast<std::int64_t>(std::floor((std::log(sigma) - lo) / width));
    return static_cast<std::size_t>(std::clamp<std::int64_t>(b, 0, static_cast<std::int64_t>(bins) - 1));
  };
  std::vector<std::int64_t> bimodal(bins, 0), uniform(bins, 0);
  SeededRng root(config.seed);
  auto a = root.child(0), b = root.child(1);
  for (std::int64_t i = 0; i < config.inspect.draws; ++i) {
    ++bimodal[bin_of(sample_bimodal(a, schedule, config.sampler))];
    ++uniform[bin_of(sample_log_uniform(b, schedule.sigma_min(), schedule.sigma_max()))];
  }
  const auto path = out / "sampler_histogram.csv";
  auto os = open_csv(path);
  os << "bin,log_sigma_lo,log_sigma_hi,bimodal,log_uniform\n";
  for (std::size_t i = 0; i < bins; ++i) {
    const double edge_hi = i + 1 == bins ? hi : lo + width * static_cast<double>(i + 1);
    os << i << ',' << lo + width * static_cast<double>(i) << ',' << edge_hi << ',' << bimodal[i] << ',' << uniform[i]
       << '\n';
  }
  close_csv(os, path);
}

void cmd_train(const RunConfig& config) {
  const auto out = prepare_out_dir(config, "train");
  if (config.paths.data.empty()) throw InvalidArgument("train: a dataset directory is required (--data)");
  const auto dataset = load_paired_dataset(config.paths.data, config.data.delta);
  const auto schedule = config.schedule.make();
  const SeededRng root(config.seed);
  DenoiserModel reflectance(config.reflectance, schedule, root.child(1).seed());
  DenoiserModel illumination(config.illumination, schedule, root.child(2).seed());

  const auto ckpt_dir = out / "checkpoints";
  std::error_code ec;
  fs::create_directories(ckpt_dir, ec);
  if (ec) throw IoError("train: cannot create " + ckpt_dir.string());
  save_pair(ckpt_dir, "step_" + zero_padded(0, 6) + "_", reflectance, illumination);

  const auto total = config.train.iterations;
  auto state = train_loop(reflectance, illumination, dataset, config.sampler, config.train, config.seed,
                          [&](const TrainState& s, std::int64_t step) {
                            save_pair(ckpt_dir, "step_" + zero_padded(step, 6) + "_", reflectance, illumination);
                            const auto& last = s.history.back();
                            std::cout << "step " << step << "/" << total << " L_total " << last.total << std::endl;
                          });
  save_pair(out, "", reflectance, illumination);

  const auto path = out / "loss.csv";
  auto os = open_csv(path);
  os << "step,L_consist,L_fixed,L_total\n";
  for (const auto& r : state.history) os << r.step + 1 << ',' << r.consist << ',' << r.fixed << ',' << r.total << '\n';
  close_csv(os, path);
}

void cmd_enhance(const RunConfig& config) {
  const auto out = prepare_out_dir(config, "enhance");
  if (config.paths.checkpoints.empty()) {
    throw InvalidArgument("enhance: a checkpoint directory is required (--checkpoints)");
  }
  const auto reflectance = load_checkpoint(config.paths.checkpoints / "reflectance.ckpt");
  const auto illumination = load_checkpoint(config.paths.checkpoints / "illumination.ckpt");

  const auto& input = config.paths.input;
  std::vector<fs::path> files;
  if (fs::is_directory(input)) {
    files = list_images(input);
  } else if (fs::is_regular_file(input)) {
    files.push_back(input);
  } else {
    throw IoError("enhance: input not found: " + input.string());
  }
  if (files.empty()) throw DataError("enhance: no images in " + input.string());

  const auto path = out / "enhance.csv";
  auto os = open_csv(path);
  os << "filename,output,wall_time_seconds\n";
  const SeededRng root(config.seed);
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto low = read_image(files[i]);
    auto rng = root.child(i);
    const auto result = one_step_enhance(reflectance, illumination, low, rng, config.enhance.ema);
    const auto name = files[i].stem().string() + config.enhance.suffix + ".png";
    write_image(out / name, result.enhanced);
    os << files[i].filename().string() << ',' << name << ',' << result.wall_time_seconds << '\n';
  }
  close_csv(os, path);
}

void cmd_eval(const RunConfig& config) {
  const auto out = prepare_out_dir(config, "eval");
  for (const auto* dir : {&config.paths.enhanced, &config.paths.reference}) {
    if (!fs::is_directory(*dir)) throw IoError("eval: not a directory: '" + dir->string() + "'");
  }
  std::map<std::string, fs::path> enhanced, reference;
  for (const auto& p : list_images(config.paths.enhanced)) {
    enhanced[stem_without_suffix(p, config.enhance.suffix)] = p;
  }
  for (const auto& p : list_images(config.paths.reference)) reference[p.stem().string()] = p;

  std::vector<std::string> orphans;
  for (const auto& [stem, p] : enhanced) {
    if (!reference.count(stem)) orphans.push_back("enhanced/" + p.filename().string());
  }
  for (const auto& [stem, p] : reference) {
    if (!enhanced.count(stem)) orphans.push_back("reference/" + p.filename().string());
  }
  if (!orphans.empty()) throw DataError("eval: unmatched files: " + join(orphans));
  if (enhanced.empty()) throw DataError("eval: no image pairs to evaluate");

  std::map<std::string, std::string> wall_times;
  if (std::ifstream timing(config.paths.enhanced / "enhance.csv"); timing) {
    std::string line;
    std::getline(timing, line);
    while (std::getline(timing, line)) {
      const auto first = line.find(','), last = line.rfind(',');
      if (first == std::string::npos || first == last) continue;
      wall_times[line.substr(first + 1, last - first - 1)] = line.substr(last + 1);
    }
  }

  const auto path = out / "metrics.csv";
  auto os = open_csv(path);
  os << "# metric_space=rgb\n";
  os << "filename,psnr,ssim,mae,wall_time_seconds\n";
  double sum_psnr = 0, sum_ssim = 0, sum_mae = 0, sum_time = 0;
  std::size_t timed = 0;
  for (const auto& [stem, p] : enhanced) {
    const auto a = read_image(p), b = read_image(reference.at(stem));
    const double ps = psnr(a, b), ss = ssim(a, b), ma = mae(a, b);
    sum_psnr += ps;
    sum_ssim += ss;
    sum_mae += ma;
    std::string wt = "NA";
    if (auto it = wall_times.find(p.filename().string()); it != wall_times.end()) {
      wt = it->second;
      sum_time += std::stod(wt);
      ++timed;
    }
    os << p.filename().string() << ',' << ps << ',' << ss << ',' << ma << ',' << wt << '\n';
  }
  const auto n = static_cast<double>(enhanced.size());
  os << "mean," << sum_psnr / n << ',' << sum_ssim / n << ',' << sum_mae / n << ',';
  if (timed) {
    os << sum_time / static_cast<double>(timed);
  } else {
    os << "NA";
  }
  os << '\n';
  close_csv(os, path);
}

int run(int argc, const char* const* argv, std::ostream& err) {
  CLI::App app{"One-step conditional consistency enhancement over Retinex components", "rcm"};
  app.require_subcommand(1);

  struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> sets;
  };
  std::map<std::string, Common> common;

  std::optional<int> count, size, bins;
  std::optional<std::int64_t> iterations, draws;
  bool no_fixed = false, no_emphasis = false;
  std::optional<bool> ema;
  std::string data, checkpoints, input, enhanced, reference;
  std::optional<std::string> suffix;

  auto add_common = [&](CLI::App* sub) {
    auto& c = common[sub->get_name()];
    sub->add_option("--config", c.config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "Random seed (u64)");
    sub->add_option("--out", c.out, "Output directory");
    sub->add_option("--set", c.sets, "Override one key, e.g. --set train.batch_size=8");
    return sub;
  };

  auto* toy = add_common(app.add_subcommand("make-toydata", "Write synthetic low/normal image pairs"));
  toy->add_option("--count", count, "Number of pairs");
  toy->add_option("--size", size, "Image side length");
  add_common(app.add_subcommand("inspect-schedule", "Write the noise grid and preconditioning table"));
  auto* sampler = add_common(app.add_subcommand("inspect-sampler", "Write log-sigma histograms of both samplers"));
  sampler->add_option("--draws", draws, "Draws per sampler");
  sampler->add_option("--bins", bins, "Histogram bins");
  auto* train = add_common(app.add_subcommand("train", "Train both component models"));
  train->add_option("--data", data, "Dataset directory with low/ and normal/");
  train->add_option("--iterations", iterations, "Training iterations");
  train->add_flag("--no-fixed-loss", no_fixed, "Disable the ground-truth alignment loss");
  train->add_flag("--no-noise-emphasis", no_emphasis, "Sample sigma log-uniformly for the alignment loss");
  auto* enhance = add_common(app.add_subcommand("enhance", "One-step enhancement of an image or directory"));
  enhance->add_option("--checkpoints", checkpoints, "Directory with reflectance.ckpt and illumination.ckpt");
  enhance->add_option("--input", input, "Input image or directory");
  enhance->add_flag("--ema,!--no-ema", ema, "Use EMA weights (default) or online weights");
  enhance->add_option("--suffix", suffix, "Output filename suffix");
  auto* eval = add_common(app.add_subcommand("eval", "Score enhanced images against references"));
  eval->add_option("--enhanced", enhanced, "Directory of enhanced images");
  eval->add_option("--reference", reference, "Directory of reference images");
  eval->add_option("--suffix", suffix, "Suffix stripped from enhanced filenames");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << "\n";
    return 2;
  }

  const auto* sub = app.get_subcommands().front();
  const auto name = sub->get_name();
  const auto& c = common[name];
  try {
    RunConfig config;
    if (!c.config_path.empty()) apply_config_file(config, c.config_path);
    for (const auto& s : c.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      set_value(config, s.substr(0, eq), s.substr(eq + 1));
    }
    if (c.seed) config.seed = *c.seed;
    if (!c.out.empty()) config.paths.out = c.out;
    if (count) config.data.count = *count;
    if (size) config.data.size = *size;
    if (draws) config.inspect.draws = *draws;
    if (bins) config.inspect.bins = *bins;
    if (iterations) config.train.iterations = *iterations;
    if (no_fixed) config.train.lambda_fixed = 0.0;
    if (no_emphasis) config.train.noise_emphasis = false;
    if (ema) config.enhance.ema = *ema;
    if (suffix) config.enhance.suffix = *suffix;
    if (!data.empty()) config.paths.data = data;
    if (!checkpoints.empty()) config.paths.checkpoints = checkpoints;
    if (!input.empty()) config.paths.input = input;
    if (!enhanced.empty()) config.paths.enhanced = enhanced;
    if (!reference.empty()) config.paths.reference = reference;
    config.validate();

    if (name == "make-toydata") cmd_make_toydata(config);
    if (name == "inspect-schedule") cmd_inspect_schedule(config);
    if (name == "inspect-sampler") cmd_inspect_sampler(config);
    if (name == "train") cmd_train(config);
    if (name == "enhance") cmd_enhance(config);
    if (name == "eval") cmd_eval(config);
    return 0;
  } catch (const ConfigError& e) {
    err << "error: config: " << e.what() << "\n";
    return 3;
  } catch (const InvalidArgument& e) {
    err << "error: invalid_argument: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    err << "error: data: " << e.what() << "\n";
    return 5;
  } catch (const IoError& e) {
    err << "error: io: " << e.what() << "\n";
    return 6;
  } catch (const fs::filesystem_error& e) {
    err << "error: io: " << e.what() << "\n";
    return 6;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace rcm::cli
