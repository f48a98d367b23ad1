// Command-line surface for training, reconstruction, majorizer comparison
// and dataset preparation. Exit codes: 0 success, 1 numerical failure,
// 2 usage or input error.

#include "caol/caol.hpp"
#include "caol/cnn2.hpp"
#include "caol/convops.hpp"
#include "caol/io.hpp"
#include "caol/kvconfig.hpp"
#include "caol/mbir.hpp"
#include "caol/rng.hpp"
#include "caol/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using caol::BoundaryCondition;
using caol::Image;

namespace {

struct FilterShape {
  Eigen::Index rh = 5, rw = 5, k = 25;
};

FilterShape parse_filter_shape(const std::string& spec) {
  FilterShape out;
  char sep1 = 0, sep2 = 0;
  std::istringstream is(spec);
  long rh = 0, rw = 0, k = 0;
  if (!(is >> rh >> sep1 >> rw >> sep2 >> k) || sep1 != 'x' || sep2 != 'x' ||
      rh < 1 || rw < 1 || k < 1)
    throw std::invalid_argument("bad --filters spec '" + spec +
                                "' (expected RHxRWxK, e.g. 7x7x49)");
  out.rh = rh;
  out.rw = rw;
  out.k = k;
  return out;
}

std::pair<Eigen::Index, Eigen::Index> parse_size(const std::string& spec) {
  char sep = 0;
  long h = 0, w = 0;
  std::istringstream is(spec);
  if (!(is >> h >> sep >> w) || sep != 'x' || h < 1 || w < 1)
    throw std::invalid_argument("bad size spec '" + spec +
                                "' (expected HxW, e.g. 64x64)");
  return {h, w};
}

BoundaryCondition parse_bc(const std::string& s) {
  if (s == "circular") return BoundaryCondition::circular;
  if (s == "symmetric") return BoundaryCondition::symmetric;
  throw std::invalid_argument("bad boundary condition '" + s + "'");
}

struct CorpusOptions {
  std::string input_dir;
  std::string synthetic;  // "L:HxW"
  uint64_t seed = 0;
  bool rescale = true;
  bool mean_subtract = true;
  bool for_mbir = false;
};

std::vector<Image> load_corpus(const CorpusOptions& opt) {
  std::vector<Image> images;
  if (!opt.synthetic.empty()) {
    const auto colon = opt.synthetic.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("bad --synthetic spec (expected L:HxW)");
    const long l = std::stol(opt.synthetic.substr(0, colon));
    const auto [h, w] = parse_size(opt.synthetic.substr(colon + 1));
    if (l < 1) throw std::invalid_argument("bad --synthetic count");
    images = caol::synthetic_corpus(l, h, w, opt.seed);
  } else {
    if (opt.input_dir.empty())
      throw std::invalid_argument("either --input or --synthetic is required");
    if (!fs::is_directory(opt.input_dir))
      throw std::invalid_argument("input directory '" + opt.input_dir +
                                  "' is not readable");
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(opt.input_dir)) {
      if (!entry.is_regular_file()) continue;
      const std::string ext = entry.path().extension().string();
      if (ext == ".pgm" || ext == ".img" || ext == ".raw")
        paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) images.push_back(caol::load_image(p));
    if (images.empty())
      throw std::invalid_argument("no .pgm/.img/.raw images in '" +
                                  opt.input_dir + "'");
  }
  const bool subtract = opt.mean_subtract && !opt.for_mbir;
  for (auto& x : images) {
    if (opt.rescale) x = caol::rescale_unit(x);
    if (subtract) x = caol::mean_subtract(x);
  }
  return images;
}

void add_corpus_options(CLI::App* cmd, CorpusOptions* opt) {
  cmd->add_option("--input", opt->input_dir,
                  "Directory of training images (.pgm/.img/.raw)");
  cmd->add_option("--synthetic", opt->synthetic,
                  "Generate a seeded synthetic corpus, spec L:HxW");
  cmd->add_option("--seed", opt->seed, "Seed for synthetic data and init");
  cmd->add_flag("--rescale,!--no-rescale", opt->rescale,
                "Rescale intensities to [0,1] (default on)");
  cmd->add_flag("--mean-subtract,!--no-mean-subtract", opt->mean_subtract,
                "Subtract the global mean (default on)");
  cmd->add_flag("--for-mbir", opt->for_mbir,
                "Disable mean subtraction (reconstruction-bound banks)");
}

caol::MajorizerKind parse_majorizer(const std::string& s) {
  if (s == "exact") return caol::MajorizerKind::exact;
  if (s == "diagonal") return caol::MajorizerKind::diagonal;
  if (s == "scaled-identity") return caol::MajorizerKind::scaled_identity;
  if (s == "lipschitz-bpg") return caol::MajorizerKind::lipschitz_bpg;
  throw std::invalid_argument("bad --majorizer '" + s + "'");
}

void write_gram_csv(const caol::FilterBank& bank, const std::string& path) {
  const Eigen::MatrixXd gram = bank.d.transpose() * bank.d;
  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < gram.cols(); ++j)
    header.push_back("d" + std::to_string(j));
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < gram.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index j = 0; j < gram.cols(); ++j) row.push_back(gram(i, j));
    rows.push_back(std::move(row));
  }
  caol::write_csv(path, header, rows);
}

std::vector<std::string> block_names_of(const caol::CaolResult& result) {
  std::vector<std::string> names;
  const size_t nb = result.log.empty() ? 2 : result.log[0].step_norms.size();
  for (size_t b = 0; b + 1 < nb; ++b)
    names.push_back(nb == 2 ? "D" : "d" + std::to_string(b));
  names.push_back("Z");
  return names;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  CorpusOptions corpus;
  std::string model = "p1";
  double alpha = 2.5e-4;
  double beta = 5e6;
  std::string filters = "7x7x49";
  std::string majorizer = "exact";
  double lambda_d = 1.0 + 1e-10;
  std::string init = "random";
  std::string bc = "circular";
  double tol = 0.0;
  int max_iter = 20000;
  double delta = 0.99;
  double omega = 0.0;
  bool no_extrapolation = false;
  int threads = 1;
  std::string out_prefix = "caol_out";
  std::string majorizer_cache;
};

int run_train(const TrainArgs& args) {
  const FilterShape shape = parse_filter_shape(args.filters);
  caol::TrainingSet ts;
  ts.images = load_corpus(args.corpus);
  ts.bc = parse_bc(args.bc);
  ts.rh = shape.rh;
  ts.rw = shape.rw;

  caol::CaolConfig config;
  config.alpha = args.alpha;
  config.beta = args.beta;
  config.model = args.model == "p2" ? caol::CaolModel::diversity
                                    : caol::CaolModel::orthogonal;
  if (args.model != "p1" && args.model != "p2")
    throw std::invalid_argument("bad --model (expected p1 or p2)");
  config.majorizer_kind = parse_majorizer(args.majorizer);
  config.lambda_d = args.lambda_d;
  config.init = args.init == "deterministic" ? caol::FilterInit::deterministic
                                             : caol::FilterInit::random_seeded;
  config.seed = args.corpus.seed;
  config.rh = shape.rh;
  config.rw = shape.rw;
  config.num_filters = shape.k;
  config.tol = args.tol;
  config.max_iter = args.max_iter;
  config.solver.delta = args.delta;
  config.solver.omega_restart = args.omega;
  config.solver.extrapolation_enabled = !args.no_extrapolation;

  // Majorizer cache: reuse the record from a previous run on the same
  // corpus, or build and store it.
  std::optional<caol::Majorizer> cached;
  if (!args.majorizer_cache.empty()) {
    if (fs::exists(args.majorizer_cache)) {
      cached = caol::load_majorizer(args.majorizer_cache);
    } else {
      switch (config.majorizer_kind) {
        case caol::MajorizerKind::exact:
        case caol::MajorizerKind::lipschitz_bpg:
          cached = caol::exact_hessian(ts);
          break;
        case caol::MajorizerKind::diagonal:
          cached = caol::diag_majorizer(ts);
          break;
        case caol::MajorizerKind::scaled_identity: {
          const caol::ScaledIdentityResult si =
              caol::scaled_identity_majorizer(ts);
          if (!si.circulant_pd)
            std::cout << "warning: scaled-identity circulant not PD; "
                         "caching the diagonal majorizer instead\n";
          cached = si.circulant_pd ? si.m : caol::diag_majorizer(ts);
          break;
        }
      }
      caol::save_majorizer(*cached, args.majorizer_cache);
    }
    if (config.majorizer_kind != caol::MajorizerKind::lipschitz_bpg)
      config.custom_majorizer = &*cached;
  }

  const caol::CaolResult result = caol::learn(ts, config);

  caol::save_filterbank(result.filters, args.out_prefix + ".fb");
  caol::save_pgm(caol::filter_mosaic(result.filters),
                 args.out_prefix + "_mosaic.pgm");
  write_gram_csv(result.filters, args.out_prefix + "_gram.csv");
  caol::bpegm::write_convergence_csv(args.out_prefix + "_convergence.csv",
                                     result.log, block_names_of(result));

  std::cout << "model: " << args.model << "\n"
            << "iterations: " << result.iterations
            << (result.converged ? " (converged)" : " (max_iter)") << "\n"
            << "final objective: " << result.final_objective << "\n"
            << "g_div: " << result.g_div_value << "\n"
            << "orthogonality residual: " << result.orthogonality_residual
            << "\n"
            << "tf residual (probe): " << result.tf_residual_probe << "\n";
  if (result.scaled_identity_fallback)
    std::cout << "warning: scaled-identity circulant not PD; "
                 "fell back to the diagonal majorizer\n";
  std::cout << "wrote " << args.out_prefix << ".fb, _mosaic.pgm, _gram.csv, "
            << "_convergence.csv\n";
  return 0;
}

// ---------------------------------------------------------------------------
// reconstruct

struct ReconArgs {
  std::string y_path;
  std::string model = "identity";
  std::string mask_path;
  int num_angles = 0;
  std::string angles;  // comma separated degrees
  std::string size;    // radon image size, HxW with H == W
  std::string bank_path;
  std::string weights_path;
  std::string ref_path;
  double gamma = 1.0;
  double alpha_prime = 1e-4;
  double lambda_a = 1.0 + 1e-10;
  bool use_psi = false;
  double tol = 1e-7;
  int max_iter = 2000;
  int threads = 1;
  std::string out_prefix = "recon_out";
};

int run_reconstruct(const ReconArgs& args) {
  const Image y_img = caol::load_image(args.y_path);
  const caol::FilterBank bank = caol::load_filterbank(args.bank_path);

  std::unique_ptr<caol::mbir::ForwardModel> model;
  Eigen::Index h = 0, w = 0;
  Eigen::VectorXd y;
  if (args.model == "identity") {
    h = y_img.h;
    w = y_img.w;
    y = y_img.v;
    model = std::make_unique<caol::mbir::IdentityModel>(h * w);
  } else if (args.model == "mask") {
    if (args.mask_path.empty())
      throw std::invalid_argument("--mask required for the mask model");
    const Image mask = caol::load_image(args.mask_path);
    h = mask.h;
    w = mask.w;
    auto mm = std::make_unique<caol::mbir::MaskModel>(mask);
    // Measurements may come as a full-size image (masked entries ignored)
    // or as the packed vector.
    if (y_img.size() == mm->rows()) {
      y = y_img.v;
    } else if (y_img.size() == mm->cols()) {
      y = mm->apply(y_img.v);
    } else {
      throw std::invalid_argument("measurement size matches neither the "
                                  "mask nor the packed measurements");
    }
    model = std::move(mm);
  } else if (args.model == "radon") {
    if (args.size.empty())
      throw std::invalid_argument("--size required for the radon model");
    const auto [sh, sw] = parse_size(args.size);
    if (sh != sw) throw std::invalid_argument("radon model needs HxH size");
    h = sh;
    w = sw;
    std::vector<double> angles;
    if (!args.angles.empty()) {
      std::istringstream is(args.angles);
      std::string tok;
      while (std::getline(is, tok, ',')) angles.push_back(std::stod(tok));
    } else if (args.num_angles > 0) {
      for (int a = 0; a < args.num_angles; ++a)
        angles.push_back(180.0 * a / args.num_angles);
    } else {
      throw std::invalid_argument("--angles or --num-angles required");
    }
    auto rm = std::make_unique<caol::mbir::RadonModel>(angles, h);
    if (y_img.size() != rm->rows())
      throw std::invalid_argument(
          "sinogram size does not match the angle/bin geometry (expected " +
          std::to_string(rm->num_angles()) + "x" +
          std::to_string(rm->num_bins()) + ")");
    y = y_img.v;
    model = std::move(rm);
  } else {
    throw std::invalid_argument("bad --model (identity|mask|radon)");
  }
  if (bank.rh > h || bank.rw > w)
    throw std::invalid_argument("filters larger than the image");

  Eigen::VectorXd weights = Eigen::VectorXd::Ones(model->rows());
  if (!args.weights_path.empty()) {
    const Image wimg = caol::load_image(args.weights_path);
    if (wimg.size() != model->rows())
      throw std::invalid_argument("--weights size mismatch");
    weights = wimg.v;
  }

  caol::mbir::ReconConfig config;
  config.gamma = args.gamma;
  config.alpha_prime = args.alpha_prime;
  config.lambda_a = args.lambda_a;
  config.use_psi = args.use_psi;
  config.tol = args.tol;
  config.max_iter = args.max_iter;

  const caol::mbir::ReconResult result =
      caol::mbir::reconstruct(y, *model, weights, bank, h, w, config);

  caol::save_raw(result.x, args.out_prefix + "_recon.img");
  caol::save_pgm(result.x, args.out_prefix + "_recon.pgm");
  caol::bpegm::write_convergence_csv(args.out_prefix + "_convergence.csv",
                                     result.log, {"x"});

  nlohmann::json meta;
  meta["iterations"] = result.iterations;
  meta["seconds"] =
      result.log.empty() ? 0.0 : result.log.back().elapsed_ms / 1000.0;
  if (!args.ref_path.empty()) {
    const Image ref = caol::load_image(args.ref_path);
    const caol::mbir::ReconMetrics m = caol::mbir::metrics(result.x, ref);
    meta["rmse"] = m.rmse;
    meta["psnr"] = m.psnr;
    Image err(result.x.h, result.x.w);
    err.v = (result.x.v - ref.v).cwiseAbs();
    caol::save_raw(err, args.out_prefix + "_err.img");
    std::cout << "rmse: " << m.rmse << "\npsnr: " << m.psnr << " dB\n";
  }
  std::ofstream(args.out_prefix + "_metrics.json") << meta.dump(2) << "\n";
  std::cout << "iterations: " << result.iterations
            << (result.converged ? " (converged)" : " (max_iter)") << "\n"
            << "wrote " << args.out_prefix << "_recon.img/.pgm, "
            << "_metrics.json, _convergence.csv\n";
  return 0;
}

// ---------------------------------------------------------------------------
// compare-majorizers

struct CompareArgs {
  CorpusOptions corpus;
  std::string filters = "7x7x49";
  double alpha = 2.5e-4;
  std::string init = "random";
  std::string bc = "circular";
  int max_iter = 400;
  int threads = 1;
  std::string out_csv = "majorizer_comparison.csv";
};

int iterations_to_threshold(const std::vector<caol::bpegm::IterationRecord>&
                                log) {
  if (log.empty()) return 0;
  const double final_obj = log.back().objective;
  const double thr = final_obj + 0.01 * std::abs(final_obj);
  for (size_t i = 0; i < log.size(); ++i)
    if (log[i].objective <= thr) return static_cast<int>(i) + 1;
  return static_cast<int>(log.size());
}

int run_compare(const CompareArgs& args) {
  const FilterShape shape = parse_filter_shape(args.filters);
  caol::TrainingSet ts;
  ts.images = load_corpus(args.corpus);
  ts.bc = parse_bc(args.bc);
  ts.rh = shape.rh;
  ts.rw = shape.rw;

  struct Run {
    std::string name;
    caol::MajorizerKind kind;
    double lambda_d;
  };
  const std::vector<Run> runs = {
      {"exact", caol::MajorizerKind::exact, 1.0 + 1e-10},
      {"diagonal", caol::MajorizerKind::diagonal, 1.0 + 1e-10},
      {"scaled-identity", caol::MajorizerKind::scaled_identity, 1.0 + 1e-10},
      {"lipschitz-bpg", caol::MajorizerKind::lipschitz_bpg, 2.0},
  };

  std::vector<std::vector<double>> rows;
  std::cout << "run, iterations, iters_to_1pct, final_objective\n";
  for (size_t r = 0; r < runs.size(); ++r) {
    caol::CaolConfig config;
    config.alpha = args.alpha;
    config.model = caol::CaolModel::orthogonal;
    config.majorizer_kind = runs[r].kind;
    config.lambda_d = runs[r].lambda_d;
    config.init = args.init == "deterministic"
                      ? caol::FilterInit::deterministic
                      : caol::FilterInit::random_seeded;
    config.seed = args.corpus.seed;
    config.rh = shape.rh;
    config.rw = shape.rw;
    config.num_filters = shape.k;
    config.max_iter = args.max_iter;
    const caol::CaolResult result = caol::learn(ts, config);
    for (const auto& rec : result.log)
      rows.push_back({static_cast<double>(r),
                      static_cast<double>(rec.iter), rec.objective});
    std::cout << runs[r].name << ", " << result.iterations << ", "
              << iterations_to_threshold(result.log) << ", "
              << result.final_objective << "\n";
  }
  caol::write_csv(args.out_csv, {"run", "iter", "objective"}, rows);

  // Dominance report (Eq.-17-style tightness chain).
  const caol::Majorizer exact = caol::exact_hessian(ts);
  const caol::Majorizer diag = caol::diag_majorizer(ts);
  const auto scaled = caol::scaled_identity_majorizer(ts);
  std::cout << "min-eig(diagonal - exact): "
            << caol::dominance_check(exact, diag) << "\n"
            << "min-eig(scaled-identity - exact): "
            << caol::dominance_check(exact, scaled.m) << "\n"
            << "min-eig(diagonal - scaled-identity) [reported, "
               "data-dependent]: "
            << caol::dominance_check(scaled.m, diag) << "\n";
  if (!scaled.circulant_pd)
    std::cout << "warning: scaled-identity circulant not PD\n";
  std::cout << "wrote " << args.out_csv << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// suggest-alpha

struct SuggestArgs {
  CorpusOptions corpus;
  std::string bc = "circular";
};

int run_suggest(const SuggestArgs& args) {
  caol::TrainingSet ts;
  ts.images = load_corpus(args.corpus);
  ts.bc = parse_bc(args.bc);
  ts.rh = 1;
  ts.rw = 2;
  const caol::AlphaSuggestion s = caol::suggest_alpha(ts);
  if (s.constant_warning) {
    std::cout << "alpha_est: 0\nwarning: constant images, nothing to "
                 "sparsify\n";
    return 0;
  }
  std::cout << "alpha_est: " << s.alpha_est << "\n"
            << "range: [" << s.alpha_lo << ", " << s.alpha_est << "]\n"
            << "nonzero fraction at alpha_est: " << s.nonzero_fraction
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gen-synthetic

struct GenArgs {
  std::string out_dir = "corpus";
  int count = 10;
  std::string size = "100x100";
  uint64_t seed = 0;
  double noise = 0.0;
};

int run_gen(const GenArgs& args) {
  const auto [h, w] = parse_size(args.size);
  if (args.count < 1) throw std::invalid_argument("bad --count");
  fs::create_directories(args.out_dir);
  const std::vector<Image> corpus =
      caol::synthetic_corpus(args.count, h, w, args.seed, args.noise);
  for (size_t i = 0; i < corpus.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%03zu.img", i);
    caol::save_raw(corpus[i], (fs::path(args.out_dir) / name).string());
  }
  std::cout << "wrote " << corpus.size() << " images to " << args.out_dir
            << "\n";
  return 0;
}

// Expands `--config FILE` into --key=value arguments placed right after the
// subcommand, so later command-line flags override file keys (every option
// takes its last occurrence).
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  for (size_t i = 1; i < args.size(); ++i) {
    std::string path;
    size_t erase_count = 0;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      erase_count = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      erase_count = 1;
    }
    if (erase_count == 0) continue;
    const caol::KeyValueConfig config = caol::KeyValueConfig::load(path);
    args.erase(args.begin() + static_cast<long>(i),
               args.begin() + static_cast<long>(i + erase_count));
    std::vector<std::string> expanded;
    for (const auto& [key, value] : config.entries)
      expanded.push_back("--" + key + "=" + value);
    // Insert just after the subcommand token (args[1]).
    args.insert(args.begin() + 2, expanded.begin(), expanded.end());
    break;
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convolutional analysis operator learning and model-based "
               "reconstruction"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Learn a filter bank");
  add_corpus_options(train, &train_args.corpus);
  train->add_option("--model", train_args.model, "p1 (orthogonal) or p2 "
                    "(diversity)");
  train->add_option("--alpha", train_args.alpha, "Sparsity weight");
  train->add_option("--beta", train_args.beta, "Diversity weight (p2)");
  train->add_option("--filters", train_args.filters, "Shape RHxRWxK");
  train->add_option("--majorizer", train_args.majorizer,
                    "exact|diagonal|scaled-identity|lipschitz-bpg");
  train->add_option("--lambda-d", train_args.lambda_d, "Filter-block lambda");
  train->add_option("--init", train_args.init, "deterministic|random");
  train->add_option("--bc", train_args.bc, "circular|symmetric");
  train->add_option("--tol", train_args.tol,
                    "Stopping tolerance (0 = per-majorizer default)");
  train->add_option("--max-iter", train_args.max_iter, "Iteration cap");
  train->add_option("--delta", train_args.delta, "Extrapolation delta < 1");
  train->add_option("--omega-restart", train_args.omega,
                    "Restart threshold in [-1,0]");
  train->add_flag("--no-extrapolation", train_args.no_extrapolation,
                  "Disable momentum");
  train->add_option("--threads", train_args.threads,
                    "Worker cap (results are thread-count independent)");
  train->add_option("--out", train_args.out_prefix, "Output prefix");
  train->add_option("--majorizer-cache", train_args.majorizer_cache,
                    "Write the majorizer record here");

  ReconArgs recon_args;
  CLI::App* recon =
      app.add_subcommand("reconstruct", "Model-based reconstruction with a "
                                        "learned bank");
  recon->add_option("--y", recon_args.y_path, "Measurement file")->required();
  recon->add_option("--model", recon_args.model, "identity|mask|radon");
  recon->add_option("--mask", recon_args.mask_path, "Mask image (mask model)");
  recon->add_option("--angles", recon_args.angles,
                    "Comma-separated projection angles in degrees");
  recon->add_option("--num-angles", recon_args.num_angles,
                    "Equally spaced angles over 180 degrees");
  recon->add_option("--size", recon_args.size, "Image size HxW (radon)");
  recon->add_option("--filters", recon_args.bank_path, "Filter bank file")
      ->required();
  recon->add_option("--weights", recon_args.weights_path,
                    "Diagonal weights file (default identity)");
  recon->add_option("--ref", recon_args.ref_path,
                    "Reference image for metrics and error map");
  recon->add_option("--gamma", recon_args.gamma, "Regularizer weight");
  recon->add_option("--alpha-prime", recon_args.alpha_prime,
                    "Threshold weight");
  recon->add_option("--lambda-a", recon_args.lambda_a, "Data-block lambda");
  recon->add_flag("--use-psi", recon_args.use_psi,
                  "Spatial strength weighting");
  recon->add_option("--tol", recon_args.tol, "Stopping tolerance");
  recon->add_option("--max-iter", recon_args.max_iter, "Iteration cap");
  recon->add_option("--threads", recon_args.threads, "Worker cap");
  recon->add_option("--out", recon_args.out_prefix, "Output prefix");

  CompareArgs compare_args;
  CLI::App* compare = app.add_subcommand(
      "compare-majorizers", "Cost-vs-iteration comparison of the majorizer "
                            "designs plus the BPG baseline");
  add_corpus_options(compare, &compare_args.corpus);
  compare->add_option("--filters", compare_args.filters, "Shape RHxRWxK");
  compare->add_option("--alpha", compare_args.alpha, "Sparsity weight");
  compare->add_option("--init", compare_args.init, "deterministic|random");
  compare->add_option("--bc", compare_args.bc, "circular|symmetric");
  compare->add_option("--max-iter", compare_args.max_iter, "Iteration cap");
  compare->add_option("--threads", compare_args.threads, "Worker cap");
  compare->add_option("--out", compare_args.out_csv, "Combined CSV path");

  SuggestArgs suggest_args;
  CLI::App* suggest = app.add_subcommand(
      "suggest-alpha", "Finite-difference threshold selection heuristic");
  add_corpus_options(suggest, &suggest_args.corpus);
  suggest->add_option("--bc", suggest_args.bc, "circular|symmetric");

  GenArgs gen_args;
  CLI::App* gen =
      app.add_subcommand("gen-synthetic", "Write a seeded synthetic corpus");
  gen->add_option("--out", gen_args.out_dir, "Output directory");
  gen->add_option("--count", gen_args.count, "Number of images");
  gen->add_option("--size", gen_args.size, "Image size HxW");
  gen->add_option("--seed", gen_args.seed, "Corpus seed");
  gen->add_option("--noise", gen_args.noise, "Additive gaussian sigma");

  std::string config_doc;  // consumed by expand_config before parsing
  for (CLI::App* sub : {train, recon, compare, suggest, gen})
    sub->add_option("--config", config_doc,
                    "Read options from a key=value config file "
                    "(command-line flags override file keys)");

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::vector<const char*> argv2;
  argv2.reserve(args.size());
  for (const auto& a : args) argv2.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv2.size()), argv2.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train->parsed()) return run_train(train_args);
    if (recon->parsed()) return run_reconstruct(recon_args);
    if (compare->parsed()) return run_compare(compare_args);
    if (suggest->parsed()) return run_suggest(suggest_args);
    if (gen->parsed()) return run_gen(gen_args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const caol::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
