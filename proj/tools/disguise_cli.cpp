// Command-line front end: fixtures, train-ae, forge, screen, exam, eval,
// convert. Exit codes: 0 ok, 1 usage, 2 data/format, 3 numerical abort.

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "disguise/audit.hpp"
#include "disguise/codec.hpp"
#include "disguise/dtns.hpp"
#include "disguise/fixtures.hpp"
#include "disguise/forge.hpp"
#include "disguise/png.hpp"
#include "disguise/serialization.hpp"

#ifndef DISGUISE_VERSION
#define DISGUISE_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace disguise;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

// Missing or unreadable input files.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw DataError("missing file " + p.string());
  return sha256_hex(io::read_file(p));
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

void write_json(const fs::path& p, const Json& j) { write_text(p, j.dump(2) + "\n"); }

Json read_json(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw DataError("missing file " + p.string());
  std::ifstream f(p);
  try {
    return Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw FormatError(p.string() + ": " + e.what(), e.byte);
  }
}

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

Image load_image(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw DataError("missing image " + p.string());
  const std::string ext = lower_ext(p);
  Image img;
  if (ext == ".dtns") img = io::load_tensor(p);
  else if (ext == ".png") img = io::load_png(p);
  else throw UsageError("unsupported image extension '" + ext + "' for " + p.string());
  require_image(img.shape(), p.string().c_str());
  return img;
}

Weights load_weights_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw DataError("missing weights " + p.string());
  return load_weights(p);
}

// Every .dtns / .png file directly inside `dir`, sorted by name; the id is the stem.
std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = lower_ext(e.path());
    if (ext == ".dtns" || ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Sample> load_samples(const fs::path& dir) {
  std::vector<Sample> samples;
  for (const auto& p : list_images(dir)) samples.push_back({p.stem().string(), load_image(p)});
  return samples;
}

// Run manifest: command, config echo, input/output hashes, wall time,
// version, seed. Outputs are re-hashed from disk so a listed file must exist.
class Manifest {
 public:
  Manifest(std::string command, Json config) : command_(std::move(command)), config_(std::move(config)) {}

  void input(const fs::path& p) { inputs_[p.string()] = sha256_file(p); }
  void input_dir(const fs::path& dir) {
    for (const auto& p : list_images(dir)) input(p);
  }
  void output(const std::string& key, const fs::path& p) { outputs_.emplace_back(key, p); }
  void seed(std::uint64_t s) { seed_ = s; }

  void write(const fs::path& path, double seconds) const {
    Json outs = Json::object();
    for (const auto& [key, p] : outputs_) outs[key] = sha256_file(p);
    Json j{{"command", command_},
           {"config", config_},
           {"inputs", inputs_},
           {"outputs", outs},
           {"version", DISGUISE_VERSION},
           {"wall_time_seconds", seconds}};
    if (seed_) j["seed"] = *seed_;
    write_json(path, j);
  }

 private:
  std::string command_;
  Json config_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::pair<std::string, fs::path>> outputs_;
  std::optional<std::uint64_t> seed_;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path sidecar(const fs::path& out) { return fs::path(out.string() + ".run.json"); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

std::string pad(std::size_t i, int width = 5) {
  std::string s = std::to_string(i);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

// ---- fixtures -------------------------------------------------------------

struct FixturesArgs {
  std::string spec, out, verify;
};

int run_fixtures(const FixturesArgs& a) {
  if (!a.verify.empty()) {
    const fs::path dir = a.verify;
    const Json index = read_json(dir / "index.json");
    std::size_t listed = 0;
    for (const auto& [rel, hash] : index.at("files").items()) {
      ++listed;
      const fs::path p = dir / rel;
      if (!fs::is_regular_file(p)) throw DataError("integrity: " + rel + " listed in index but missing");
      if (sha256_file(p) != hash.get<std::string>()) throw DataError("integrity: hash mismatch for " + rel);
    }
    std::size_t present = 0;
    for (const char* sub : {"corpus", "triples"})
      if (fs::is_directory(dir / sub))
        for (const auto& e : fs::recursive_directory_iterator(dir / sub))
          if (e.is_regular_file()) ++present;
    if (present != listed)
      throw DataError("integrity: index lists " + std::to_string(listed) + " files, directory holds " +
                      std::to_string(present));
    std::cout << "verified " << listed << " files\n";
    return kOk;
  }
  if (a.spec.empty() || a.out.empty()) throw UsageError("fixtures: --spec and --out are required (or --verify <dir>)");
  if (!fs::is_regular_file(a.spec)) throw UsageError("fixtures: spec file not found: " + a.spec);
  Stopwatch clock;
  const FixtureSpec spec = fixture_spec_from_json(read_json(a.spec));
  const auto corpus = make_clean_corpus(spec);
  const auto triples = make_triples(spec, corpus);

  const fs::path out = a.out;
  ensure_dir(out / "corpus");
  Json files = Json::object();
  Json corpus_ids = Json::array();
  Manifest manifest("fixtures", to_json(spec));
  manifest.input(a.spec);
  manifest.seed(spec.texture_seed);
  auto emit = [&](const std::string& rel, const Image& img) {
    io::save_tensor(out / rel, img);
    files[rel] = sha256_file(out / rel);
    manifest.output(rel, out / rel);
  };
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    emit("corpus/" + pad(i) + ".dtns", corpus[i]);
    corpus_ids.push_back(pad(i));
  }
  Json triple_list = Json::array();
  for (std::size_t t = 0; t < triples.size(); ++t) {
    const std::string dir = "triples/" + pad(t, 2);
    ensure_dir(out / dir);
    emit(dir + "/target.dtns", triples[t].target);
    emit(dir + "/base.dtns", triples[t].base);
    triple_list.push_back({{"id", pad(t, 2)}, {"base_index", triples[t].base_index}});
  }
  write_json(out / "index.json", Json{{"spec", to_json(spec)},
                                      {"corpus", corpus_ids},
                                      {"triples", triple_list},
                                      {"files", files}});
  manifest.output("index.json", out / "index.json");
  manifest.write(out / "run_manifest.json", clock.seconds());
  std::cout << "wrote " << corpus.size() << " corpus images and " << triples.size() << " triples to " << out << "\n";
  return kOk;
}

// ---- train-ae -------------------------------------------------------------

struct TrainArgs {
  std::string corpus, out;
  int epochs = 60;
  int batch = 16;
  double lr = 2e-3;
  std::uint64_t seed = 0;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  Stopwatch clock;
  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.learning_rate = a.lr;
  cfg.seed = a.seed;
  cfg.corpus_path = a.corpus;
  cfg.validate();
  std::vector<Image> corpus;
  for (auto& s : load_samples(a.corpus)) corpus.push_back(std::move(s.image));
  if (corpus.empty()) throw UsageError("train-ae: corpus directory holds no images");

  auto result = train_autoencoder(cfg, corpus, [&](int epoch, double loss) {
    if (!a.quiet) std::cout << "epoch " << epoch << " loss " << loss << std::endl;
  });
  save_weights(a.out, result.weights);
  const fs::path log_path = fs::path(a.out + ".loss.json");
  write_json(log_path, Json{{"epoch_losses", result.epoch_losses},
                            {"final_mean_loss", mean_reconstruction_loss(result.weights, corpus)}});

  Manifest m("train-ae", Json{{"corpus", a.corpus},
                              {"epochs", cfg.epochs},
                              {"batch_size", cfg.batch_size},
                              {"learning_rate", cfg.learning_rate},
                              {"seed", cfg.seed}});
  m.input_dir(a.corpus);
  m.seed(cfg.seed);
  m.output("weights", a.out);
  m.output("loss_log", log_path);
  m.write(sidecar(a.out), clock.seconds());
  return kOk;
}

// ---- forge ----------------------------------------------------------------

struct ForgeArgs {
  std::string weights, target, base, out, variant = "standard", init = "base", optimizer = "gd";
  DisguiseConfig cfg;
};

InitMode parse_init(const std::string& s) {
  if (s == "base") return InitMode::base();
  if (s == "zeros") return InitMode::zeros();
  if (s.rfind("gaussian:", 0) == 0) {
    try {
      std::size_t used = 0;
      const double sigma = std::stod(s.substr(9), &used);
      if (used == s.size() - 9) return InitMode::gaussian(sigma);
    } catch (const std::exception&) {
    }
  }
  throw UsageError("forge: --init must be base, zeros or gaussian:SIGMA, got '" + s + "'");
}

int run_forge(ForgeArgs a) {
  Stopwatch clock;
  if (a.variant == "standard") a.cfg.variant = Variant::standard;
  else if (a.variant == "flip") a.cfg.variant = Variant::flip_robust;
  else if (a.variant == "evasion") a.cfg.variant = Variant::evasion;
  else throw UsageError("forge: unknown variant '" + a.variant + "'");
  a.cfg.init = parse_init(a.init);
  a.cfg.optimizer = a.optimizer == "adam" ? OptimizerKind::adam : OptimizerKind::gd;
  a.cfg.validate();

  const Weights w = load_weights_file(a.weights);
  const Image target = load_image(a.target);
  const Image base = load_image(a.base);

  const fs::path out = a.out;
  ensure_dir(out);
  Manifest m("forge", to_json(a.cfg));
  m.input(a.weights);
  m.input(a.target);
  m.input(a.base);
  m.seed(a.cfg.seed);

  auto emit = [&](const DisguiseResult& r, bool aborted) {
    io::save_tensor(out / "disguise.dtns", r.disguise);
    io::save_png(out / "disguise.png", r.disguise);
    write_json(out / "result.json", to_json(r, aborted));
    m.output("disguise.dtns", out / "disguise.dtns");
    m.output("disguise.png", out / "disguise.png");
    m.output("result.json", out / "result.json");
    m.write(out / "run_manifest.json", clock.seconds());
  };
  try {
    const auto r = generate_disguise(w, target, base, a.cfg);
    emit(r, false);
    const auto& f = r.trace.back();
    std::cout << (r.converged ? "converged" : "not converged") << " after " << r.epochs_run << " epochs: d1 "
              << f.d1 << " d2 " << f.d2 << "\n";
  } catch (const DisguiseAborted& e) {
    emit(e.partial(), true);
    throw;
  }
  return kOk;
}

// ---- screen / exam / eval -------------------------------------------------

int run_screen(const std::string& weights, const std::string& target, const std::string& dataset, double gamma2,
               const std::string& out) {
  Stopwatch clock;
  const Weights w = load_weights_file(weights);
  const Image xc = load_image(target);
  const auto samples = load_samples(dataset);
  if (samples.empty()) throw UsageError("screen: dataset directory holds no images");
  const auto report = feature_screen(w, xc, samples, gamma2);
  write_json(out, to_json(report));
  Manifest m("screen", Json{{"dataset", dataset}, {"gamma2", gamma2}});
  m.input(weights);
  m.input(target);
  m.input_dir(dataset);
  m.output("report", out);
  m.write(sidecar(out), clock.seconds());
  return kOk;
}

struct ExamArgs {
  std::string weights, dataset, calibrate, out, dump;
  std::optional<double> zeta;
};

int run_exam(const ExamArgs& a) {
  Stopwatch clock;
  if (a.zeta.has_value() == !a.calibrate.empty()) throw UsageError("exam: give exactly one of --zeta or --calibrate");
  const Weights w = load_weights_file(a.weights);
  const auto samples = load_samples(a.dataset);
  if (samples.empty()) throw UsageError("exam: dataset directory holds no images");
  double zeta = a.zeta.value_or(0.0);
  Json cfg{{"dataset", a.dataset}};
  if (!a.calibrate.empty()) {
    const auto known = load_samples(a.calibrate);
    if (known.empty()) throw UsageError("exam: calibration directory holds no images");
    std::vector<double> losses;
    for (const auto& s : known) losses.push_back(reconstruction_loss(w, s.image));
    zeta = calibrate_threshold(losses);
    cfg["calibrate"] = a.calibrate;
  } else {
    cfg["zeta"] = zeta;
  }
  const auto report = encoder_decoder_exam(w, samples, zeta);
  write_json(a.out, to_json(report));

  Manifest m("exam", cfg);
  m.input(a.weights);
  m.input_dir(a.dataset);
  if (!a.calibrate.empty()) m.input_dir(a.calibrate);
  m.output("report", a.out);
  if (!a.dump.empty()) {
    const fs::path dir = a.dump;
    ensure_dir(dir);
    for (const auto& e : report.entries) {
      io::save_tensor(dir / (e.id + ".dtns"), e.reconstruction);
      io::save_png(dir / (e.id + ".png"), e.reconstruction);
      m.output("recon/" + e.id + ".dtns", dir / (e.id + ".dtns"));
      m.output("recon/" + e.id + ".png", dir / (e.id + ".png"));
    }
  }
  m.write(sidecar(a.out), clock.seconds());
  std::cout << "zeta " << zeta << "\n";
  return kOk;
}

// Scores are oriented so that larger means "more likely a disguise": the exam
// loss as is, the screen distance negated.
int run_eval(const std::string& report_path, const std::string& labels_path, const std::string& out) {
  Stopwatch clock;
  const Json report = read_json(report_path);
  const Json labels = read_json(labels_path);
  if (!labels.is_object()) throw FormatError("labels: expected an object of id -> \"disguise\"|\"clean\"", 0);
  const std::string kind = report.value("kind", "");
  std::string score_key;
  double threshold = 0.0;
  double sign = 1.0;
  if (kind == "exam") {
    score_key = "loss";
    threshold = report.at("zeta").get<double>();
  } else if (kind == "screen") {
    score_key = "distance";
    sign = -1.0;
    threshold = -report.at("gamma2").get<double>();
  } else {
    throw FormatError("report: unknown kind '" + kind + "'", 0);
  }
  std::vector<double> positive, negative;
  for (const auto& e : report.at("entries")) {
    const std::string id = e.at("id").get<std::string>();
    if (!labels.contains(id)) throw FormatError("labels: no label for '" + id + "'", 0);
    const std::string label = labels.at(id).get<std::string>();
    const double score = sign * e.at(score_key).get<double>();
    if (label == "disguise") positive.push_back(score);
    else if (label == "clean") negative.push_back(score);
    else throw FormatError("labels: '" + id + "' has label '" + label + "'", 0);
  }
  if (positive.empty() || negative.empty()) throw UsageError("eval: need at least one disguise and one clean entry");
  Json metrics = to_json(summarize(positive, negative, threshold));
  metrics["report_kind"] = kind;
  write_json(out, metrics);
  Manifest m("eval", Json{{"report", report_path}, {"labels", labels_path}});
  m.input(report_path);
  m.input(labels_path);
  m.output("metrics", out);
  m.write(sidecar(out), clock.seconds());
  std::cout << "auroc " << metrics["auroc"].get<double>() << "\n";
  return kOk;
}

// ---- convert --------------------------------------------------------------

int run_convert(const std::string& in, const std::string& out) {
  Stopwatch clock;
  const std::string in_ext = lower_ext(in), out_ext = lower_ext(out);
  for (const auto& e : {in_ext, out_ext})
    if (e != ".png" && e != ".dtns") throw UsageError("convert: unsupported extension '" + e + "'");
  const Image img = load_image(in);
  if (out_ext == ".png") io::save_png(out, img);
  else io::save_tensor(out, img);
  Manifest m("convert", Json{{"in", in}, {"out", out}});
  m.input(in);
  m.output("converted", out);
  m.write(sidecar(out), clock.seconds());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disguised-copyright toolkit: forge and audit latent-space disguises"};
  app.set_version_flag("--version", std::string(DISGUISE_VERSION));
  app.require_subcommand(1);

  FixturesArgs fx;
  auto* fixtures = app.add_subcommand("fixtures", "Generate the synthetic corpus and disguise triples");
  fixtures->add_option("--spec", fx.spec, "Fixture spec (JSON)");
  fixtures->add_option("--out", fx.out, "Output directory");
  fixtures->add_option("--verify", fx.verify, "Check an existing fixture directory against its index");

  TrainArgs tr;
  auto* train = app.add_subcommand("train-ae", "Train the autoencoder on a corpus directory");
  train->add_option("--corpus", tr.corpus, "Directory of .dtns/.png images")->required();
  train->add_option("--epochs", tr.epochs, "Training epochs");
  train->add_option("--lr", tr.lr, "Adam learning rate");
  train->add_option("--batch-size", tr.batch, "Minibatch size");
  train->add_option("--seed", tr.seed, "Init and shuffle seed");
  train->add_option("--out", tr.out, "Weights file (.dwgt)")->required();
  train->add_flag("--quiet", tr.quiet, "Suppress the per-epoch log");

  ForgeArgs fg;
  auto* forge = app.add_subcommand("forge", "Craft a disguise for a (target, base) pair");
  forge->add_option("--weights", fg.weights)->required();
  forge->add_option("--target", fg.target, "Copyrighted image x_c")->required();
  forge->add_option("--base", fg.base, "Base image x_b")->required();
  forge->add_option("--alpha", fg.cfg.alpha);
  forge->add_option("--eta", fg.cfg.eta, "Gradient-descent step");
  forge->add_option("--gamma1", fg.cfg.gamma1);
  forge->add_option("--gamma2", fg.cfg.gamma2);
  forge->add_option("--variant", fg.variant)->check(CLI::IsMember({"standard", "flip", "evasion"}));
  forge->add_option("--init", fg.init, "base | zeros | gaussian:SIGMA");
  forge->add_option("--optimizer", fg.optimizer)->check(CLI::IsMember({"gd", "adam"}));
  forge->add_option("--adam-lr", fg.cfg.adam_lr);
  forge->add_option("--max-epochs", fg.cfg.max_epochs);
  forge->add_option("--log-every", fg.cfg.log_every);
  forge->add_option("--seed", fg.cfg.seed);
  forge->add_option("--out", fg.out, "Output directory")->required();

  std::string sc_weights, sc_target, sc_dataset, sc_out;
  double sc_gamma2 = 0.0;
  auto* screen = app.add_subcommand("screen", "Flag dataset images whose latent lies near the target's");
  screen->add_option("--weights", sc_weights)->required();
  screen->add_option("--target", sc_target)->required();
  screen->add_option("--dataset", sc_dataset)->required();
  screen->add_option("--gamma2", sc_gamma2)->required();
  screen->add_option("--out", sc_out)->required();

  ExamArgs ex;
  auto* exam = app.add_subcommand("exam", "Flag images with high reconstruction loss");
  exam->add_option("--weights", ex.weights)->required();
  exam->add_option("--dataset", ex.dataset)->required();
  exam->add_option("--zeta", ex.zeta);
  exam->add_option("--calibrate", ex.calibrate, "Directory of known disguises; zeta = their minimum loss");
  exam->add_option("--out", ex.out)->required();
  exam->add_option("--dump-recon", ex.dump, "Write reconstructions (.dtns and .png) here");

  std::string ev_report, ev_labels, ev_out;
  auto* eval = app.add_subcommand("eval", "Score a screen or exam report against labels");
  eval->add_option("--report", ev_report)->required();
  eval->add_option("--labels", ev_labels, "JSON object id -> \"disguise\" | \"clean\"")->required();
  eval->add_option("--out", ev_out)->required();

  std::string cv_in, cv_out;
  auto* convert = app.add_subcommand("convert", "Convert between PNG and DTNS");
  convert->add_option("--in", cv_in)->required();
  convert->add_option("--out", cv_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*fixtures) return run_fixtures(fx);
    if (*train) return run_train(tr);
    if (*forge) return run_forge(fg);
    if (*screen) return run_screen(sc_weights, sc_target, sc_dataset, sc_gamma2, sc_out);
    if (*exam) return run_exam(ex);
    if (*eval) return run_eval(ev_report, ev_labels, ev_out);
    if (*convert) return run_convert(cv_in, cv_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kNumerical;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << " (offset " << e.offset() << ")\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
