#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "emotion/checkpoint.hpp"
#include "emotion/cnn.hpp"
#include "emotion/dataset.hpp"
#include "emotion/errors.hpp"
#include "emotion/rau.hpp"
#include "emotion/synth.hpp"
#include "emotion/visualize.hpp"

namespace emotion::cli {

namespace fs = std::filesystem;

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw UsageError("config line " + std::to_string(line_no) + ": empty key");
    pairs.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return pairs;
}

namespace {

struct Options {
  std::uint64_t seed = 1;
  std::string config;
  std::string out;
  std::string manifest;
  std::string model;
  std::string image;
  std::string family;

  std::size_t per_class = 23;
  double fraction = 0.75;
  std::size_t k = 2;
  std::size_t predict_k = 3;

  // rau
  std::string structure = "deep";
  std::size_t code_size = 300;
  std::size_t ae_epochs = 60;
  std::size_t embed_iterations = 100;
  std::string embed_mode = "fresh";
  float ae_lr = 1.0f;
  float ae_momentum = 0.9f;
  std::size_t ae_batch = 32;

  // cnn
  std::size_t epochs_per_run = 20;
  std::size_t runs = 18;
  std::size_t filters = 10;
  std::size_t fc_hidden = 64;
  double validation_fraction = 0.1;
  float cnn_lr = 0.01f;
  float cnn_momentum = 0.9f;
  std::size_t cnn_batch = 32;

  // viz
  std::size_t layer = 1;
  float scale = 1.0f;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

void require_file(const std::string& path, const std::string& what) {
  require(!path.empty(), "--" + what + " is required");
  if (!fs::exists(path)) throw IoError(what + " '" + path + "' does not exist");
}

DatasetManifest open_manifest(const std::string& path) {
  require_file(path, "manifest");
  return read_manifest(path);
}

std::string family_of(const std::string& name) {
  require(name == "rau" || name == "cnn", "--family must be rau or cnn, got '" + name + "'");
  return name;
}

/// Fills options the command line left unset from the config file, then
/// logs every option of the command.
void resolve_config(CLI::App* cmd, const Options& opt, std::ostream& err) {
  if (!opt.config.empty()) {
    require_file(opt.config, "config");
    for (const auto& [key, value] : parse_config_text(read_file(opt.config))) {
      CLI::Option* o = cmd->get_option_no_throw("--" + key);
      require(o != nullptr && key != "config", "unknown config key '" + key + "' for command '" + cmd->get_name() + "'");
      if (o->count() > 0) continue;
      o->add_result(value);
      o->run_callback();
    }
  }
  std::string path = cmd->get_name();
  for (const CLI::App* p = cmd->get_parent(); p && p->get_parent(); p = p->get_parent()) path = p->get_name() + " " + path;
  err << "# resolved configuration: " << path << '\n';
  std::istringstream lines(cmd->config_to_str(true, false));
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty()) err << "#   " << line << '\n';
  }
}

AutoencoderConfig rau_config(const Options& o) {
  AutoencoderConfig c;
  c.depth = parse_depth(o.structure);
  c.code_size = o.code_size;
  c.epochs_per_class = o.ae_epochs;
  c.embed_iterations = o.embed_iterations;
  c.embed_mode = parse_embed_mode(o.embed_mode);
  c.optimizer = {o.ae_lr, o.ae_momentum, o.ae_batch};
  c.seed = o.seed;
  c.validate();
  return c;
}

CnnConfig cnn_config(const Options& o) {
  CnnConfig c;
  c.filters_per_conv = o.filters;
  c.fc_hidden = o.fc_hidden;
  c.optimizer = {o.cnn_lr, o.cnn_momentum, o.cnn_batch};
  c.epochs_per_run = o.epochs_per_run;
  c.runs = o.runs;
  c.validation_fraction = o.validation_fraction;
  c.seed = o.seed;
  return c;
}

GrayImage load_input_image(const std::string& path, std::ostream& err) {
  require_file(path, "image");
  GrayImage img = load_image(path);
  if (img.height() != kImageSize || img.width() != kImageSize) {
    err << "notice: resizing " << img.height() << "x" << img.width() << " input to " << kImageSize << "x" << kImageSize
        << '\n';
    img = resize_bilinear(img, kImageSize, kImageSize);
  }
  return img;
}

void cmd_synth(const Options& o, std::ostream& out) {
  require(!o.out.empty(), "--out is required");
  require(o.per_class >= 1, "--per-class must be at least 1");
  const DatasetManifest m = synth_generate(o.per_class, o.seed, o.out);
  out << "wrote " << m.records.size() << " images and " << (fs::path(o.out) / "manifest.tsv").string() << '\n';
}

void cmd_split(const Options& o, std::ostream& out) {
  require(!o.out.empty(), "--out is required");
  require(o.fraction > 0.0 && o.fraction < 1.0, "--fraction must lie strictly between 0 and 1");
  DatasetManifest m = split_dataset(open_manifest(o.manifest), o.fraction, o.seed);
  // Record paths are relative to the manifest's directory; rebase them onto
  // the directory of the new file.
  const fs::path out_dir = fs::absolute(fs::path(o.out)).parent_path();
  for (auto& r : m.records) r.path = fs::absolute(m.resolve(r)).lexically_normal().lexically_relative(out_dir).string();
  m.base_dir = out_dir.string();
  fs::create_directories(out_dir);
  write_manifest(m, o.out);
  out << "train " << m.count(Split::train) << "\ttest " << m.count(Split::test) << '\n';
}

void cmd_train_rau(const Options& o, std::ostream& out) {
  require(!o.out.empty(), "--out is required");
  const AutoencoderConfig cfg = rau_config(o);
  const DatasetManifest m = open_manifest(o.manifest);
  const RauModel model = train_rau(m, cfg);
  fs::create_directories(o.out);
  save_rau(model, o.out);
  std::string log = "class\tepoch\tloss\n";
  char line[96];
  for (std::size_t c = 0; c < model.autoencoders.size(); ++c) {
    const auto& h = model.autoencoders[c].meta.loss_history;
    for (std::size_t e = 0; e < h.size(); ++e) {
      std::snprintf(line, sizeof line, "%s\t%zu\t%.8f\n", kClassNames[c].data(), e + 1, h[e]);
      log += line;
    }
    std::snprintf(line, sizeof line, "%-10s loss %.6f -> %.6f\n", kClassNames[c].data(), h.front(), h.back());
    out << line;
  }
  write_file((fs::path(o.out) / "training_log.tsv").string(), log);
  out << "saved " << model.autoencoders.size() << " class autoencoders and units to " << o.out << '\n';
}

void cmd_train_cnn(const Options& o, std::ostream& out) {
  require(!o.out.empty(), "--out is required");
  const DatasetManifest m = open_manifest(o.manifest);
  CnnModel model = build_cnn(cnn_config(o));
  train_cnn(model, m);
  fs::create_directories(o.out);
  const std::string ckpt = (fs::path(o.out) / "cnn.ckpt").string();
  save_cnn(model, ckpt);
  const std::string log = format_training_log(model);
  write_file((fs::path(o.out) / "training_log.tsv").string(), log);
  out << log;
  char line[160];
  std::snprintf(line, sizeof line, "kept block %zu of %zu (validation %.2f%%), %zu cumulative iterations\n",
                model.best_block, model.log.size(), model.best_validation * 100.0, model.iterations);
  out << line << "saved " << ckpt << '\n';
}

void cmd_eval(const Options& o, std::ostream& out) {
  const std::string family = family_of(o.family);
  require_file(o.model, "model");
  const DatasetManifest m = open_manifest(o.manifest);
  require(m.count(Split::test) > 0, "manifest has no test records; run split first");
  std::string text;
  if (family == "rau") {
    text = render_report(evaluate_rau(load_rau(o.model), m, o.k));
  } else {
    const CnnEvaluation ev = evaluate_cnn(load_cnn(o.model), m, o.k);
    text = render_report(ev.image_level) + "\n" + render_report(ev.patch_level);
  }
  out << text;
  if (!o.out.empty()) write_file(o.out, text);
}

void cmd_predict(const Options& o, std::ostream& out, std::ostream& err) {
  const std::string family = family_of(o.family);
  require_file(o.model, "model");
  require(o.predict_k >= 1 && o.predict_k <= kNumClasses, "--k must lie in [1, 7]");
  const GrayImage img = load_input_image(o.image, err);
  char line[64];
  if (family == "rau") {
    const RauModel model = load_rau(o.model);
    const Tensor flat = img.tensor().reshaped({kFlatImageSize});
    for (const auto& [cls, distance] : classify_topk(model, flat, o.predict_k, model.config.seed)) {
      std::snprintf(line, sizeof line, "%s\t%.2f%%\n", kClassNames[cls].data(), (1.0 - distance / 2.0) * 100.0);
      out << line;
    }
  } else {
    for (const auto& [cls, p] : predict_image(load_cnn(o.model), img, o.predict_k)) {
      std::snprintf(line, sizeof line, "%s\t%.2f%%\n", kClassNames[cls].data(), p * 100.0);
      out << line;
    }
  }
}

void cmd_viz(const Options& o, std::ostream& out) {
  require(!o.out.empty(), "--out is required");
  require_file(o.model, "model");
  require_file(o.image, "image");
  const CnnModel model = load_cnn(o.model);
  const std::vector<GrayImage> maps = visualize_filter_maps(model, load_image(o.image), o.layer, o.scale);
  fs::create_directories(o.out);
  char name[64];
  for (std::size_t i = 0; i < maps.size(); ++i) {
    std::snprintf(name, sizeof name, "layer%zu_filter%02zu.pgm", o.layer, i + 1);
    save_pgm(maps[i], (fs::path(o.out) / name).string());
  }
  out << "wrote " << maps.size() << " filter maps to " << o.out << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app("Facial expression classification with representational autoencoder units and a patch CNN",
               "emotion");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", o.seed, "seed for every random choice");
    cmd->add_option("--config", o.config, "key=value file; command-line flags win");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a labelled synthetic corpus");
  synth->add_option("--per-class", o.per_class, "images per class");
  synth->add_option("--out", o.out, "output directory");
  common(synth);

  CLI::App* split = app.add_subcommand("split", "assign a stratified train/test split");
  split->add_option("--manifest", o.manifest, "input manifest");
  split->add_option("--fraction", o.fraction, "training share per class");
  split->add_option("--out", o.out, "output manifest path");
  common(split);

  CLI::App* train = app.add_subcommand("train", "train a model family");
  train->require_subcommand(1);
  CLI::App* train_rau_cmd = train->add_subcommand("rau", "one autoencoder per class plus representation units");
  train_rau_cmd->add_option("--manifest", o.manifest, "split manifest");
  train_rau_cmd->add_option("--structure", o.structure, "deep or shallow");
  train_rau_cmd->add_option("--k", o.code_size, "representation size (300 or 500)");
  train_rau_cmd->add_option("--epochs", o.ae_epochs, "epochs per class autoencoder");
  train_rau_cmd->add_option("--embed-iterations", o.embed_iterations, "iterations when embedding a test image");
  train_rau_cmd->add_option("--embed-mode", o.embed_mode, "fresh or class");
  train_rau_cmd->add_option("--lr", o.ae_lr, "learning rate");
  train_rau_cmd->add_option("--momentum", o.ae_momentum, "momentum");
  train_rau_cmd->add_option("--batch-size", o.ae_batch, "minibatch size");
  train_rau_cmd->add_option("--out", o.out, "output directory");
  common(train_rau_cmd);

  CLI::App* train_cnn_cmd = train->add_subcommand("cnn", "patch CNN with best-validation block selection");
  train_cnn_cmd->add_option("--manifest", o.manifest, "split manifest");
  train_cnn_cmd->add_option("--epochs-per-run", o.epochs_per_run, "epochs per block");
  train_cnn_cmd->add_option("--runs", o.runs, "number of blocks");
  train_cnn_cmd->add_option("--filters", o.filters, "filters per conv layer");
  train_cnn_cmd->add_option("--fc-hidden", o.fc_hidden, "hidden dense units");
  train_cnn_cmd->add_option("--validation-fraction", o.validation_fraction, "held-out share of training patches");
  train_cnn_cmd->add_option("--lr", o.cnn_lr, "learning rate");
  train_cnn_cmd->add_option("--momentum", o.cnn_momentum, "momentum");
  train_cnn_cmd->add_option("--batch-size", o.cnn_batch, "minibatch size");
  train_cnn_cmd->add_option("--out", o.out, "output directory");
  common(train_cnn_cmd);

  CLI::App* eval = app.add_subcommand("eval", "report top-1/top-k accuracy and the confusion matrix");
  eval->add_option("--family", o.family, "rau or cnn");
  eval->add_option("--model", o.model, "RAU directory or CNN checkpoint");
  eval->add_option("--manifest", o.manifest, "split manifest");
  eval->add_option("--k", o.k, "k for top-k");
  eval->add_option("--out", o.out, "also write the report here");
  common(eval);

  CLI::App* predict = app.add_subcommand("predict", "rank the classes for one image");
  predict->add_option("--family", o.family, "rau or cnn");
  predict->add_option("--model", o.model, "RAU directory or CNN checkpoint");
  predict->add_option("--image", o.image, "PGM or PNG image");
  predict->add_option("--k", o.predict_k, "classes to print");
  common(predict);

  CLI::App* viz = app.add_subcommand("viz", "write the filter maps of one conv layer as PGM files");
  viz->add_option("--model", o.model, "CNN checkpoint");
  viz->add_option("--image", o.image, "PGM or PNG image");
  viz->add_option("--layer", o.layer, "structural layer number of a conv layer");
  viz->add_option("--scale", o.scale, "brightness multiplier");
  viz->add_option("--out", o.out, "output directory");
  common(viz);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    if (cmd == train) cmd = train->get_subcommands().front();
    resolve_config(cmd, o, err);
    if (cmd == synth) cmd_synth(o, out);
    else if (cmd == split) cmd_split(o, out);
    else if (cmd == train_rau_cmd) cmd_train_rau(o, out);
    else if (cmd == train_cnn_cmd) cmd_train_cnn(o, out);
    else if (cmd == eval) cmd_eval(o, out);
    else if (cmd == predict) cmd_predict(o, out, err);
    else if (cmd == viz) cmd_viz(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const SplitError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace emotion::cli
