#pragma once

// Command-line front end. `run` is kept separate from main so tests can drive
// it in-process.

#include <array>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hdrnn/hdrnn.hpp"

namespace hdrnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

struct Shared {
  std::string out;
  std::uint64_t seed = 0;
  std::string config;
  std::size_t workers = 1;
  std::string dtype = "f64";
  CLI::Option* seed_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
  CLI::Option* dtype_opt = nullptr;
};

struct Io {
  std::ostream& out;
  std::ostream& err;
};

inline fs::path out_dir(const Shared& s) {
  require(!s.out.empty(), ErrorCategory::usage, "--out <dir> is required");
  std::error_code ec;
  fs::create_directories(s.out, ec);
  if (ec) fail(ErrorCategory::io, "cannot create output directory '" + s.out + "': " + ec.message());
  return fs::path(s.out);
}

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorCategory::format, path.string() + ": " + e.what());
  }
}

/// Defaults <- --config file <- explicit flags.
inline TrainConfig resolve_config(const Shared& s) {
  TrainConfig c;
  if (!s.config.empty()) c = train_config_from_json(read_json(s.config), c);
  if (s.seed_opt->count()) c.seed = s.seed;
  if (s.workers_opt->count()) c.workers = s.workers;
  if (s.dtype_opt->count()) c.dtype = parse_dtype(s.dtype);
  validate(c);
  return c;
}

inline void write_out(const fs::path& dir, const std::string& name, std::string_view text) { write_text(dir / name, text); }

inline void save_tone_map(const fs::path& ppm, const ToneMap& tm) { write_file(ppm, write_ppm(to_ldr(tm))); }

inline ToneMap load_tone_map(const fs::path& ppm) {
  const LdrImage img = read_ppm(read_file(ppm));
  ToneMap tm(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) tm.data[i] = img.data[i] / 255.0f;
  return tm;
}

/// CRF spec as stored in stack.json: built-ins verbatim, files as absolute paths.
inline std::string crf_record(const std::string& spec) {
  if (spec.empty()) return "identity";
  if (spec == "identity" || spec.rfind("gamma:", 0) == 0) return spec;
  return fs::absolute(spec).lexically_normal().string();
}

// ---------------------------------------------------------------------------
// Stack metadata (stack.json): image files relative to the JSON file.

struct StackFile {
  ExposureStack stack;
  double scale = 1.0;
  std::string crf = "identity";
};

inline json stack_json(const ExposureStack& s, const std::vector<std::string>& files, double scale,
                       const std::string& crf, const std::string& mode) {
  json j;
  j["images"] = files;
  j["exposures"] = s.exposures();
  j["ladder_indices"] = s.ladder_indices;
  j["scale"] = scale;
  j["crf"] = crf;
  j["mode"] = mode;
  return j;
}

inline StackFile load_stack(const fs::path& path) {
  const json j = read_json(path);
  StackFile sf;
  try {
    for (const auto& f : j.at("images")) sf.stack.images.push_back(load_ldr(path.parent_path() / f.get<std::string>()));
    if (j.contains("ladder_indices")) sf.stack.ladder_indices = j["ladder_indices"].get<std::vector<std::size_t>>();
    sf.scale = j.value("scale", 1.0);
    sf.crf = j.value("crf", std::string("identity"));
  } catch (const json::exception& e) {
    fail(ErrorCategory::validation, path.string() + ": " + e.what());
  }
  validate(sf.stack);
  return sf;
}

// ---------------------------------------------------------------------------
// Checkpoint helpers

template <typename T>
void save_net(const fs::path& path, const nn::Network<T>& net, const json& meta) {
  write_file(path, nn::save_checkpoint(net, meta.dump(), true));
}

template <typename T>
nn::Network<T> load_net(const fs::path& path, json& meta, Io& io) {
  auto ck = nn::load_checkpoint<T>(read_file(path));
  if (!ck.trained) io.err << "warning: checkpoint '" << path.string() << "' is marked untrained\n";
  try {
    meta = ck.metadata.empty() ? json::object() : json::parse(ck.metadata);
  } catch (const json::exception&) {
    meta = json::object();
  }
  return std::move(ck.net);
}

// ---------------------------------------------------------------------------
// Dataset assembly

struct ManifestData {
  Manifest manifest;
  fs::path base;
  Crf crf;
};

inline ManifestData load_manifest(const std::string& path) {
  require(!path.empty(), ErrorCategory::usage, "--manifest <file> is required");
  ManifestData d{manifest_from_json(read_text(path)), fs::path(path).parent_path(), {}};
  d.crf = resolve_crf(d.manifest.crf, d.base);
  return d;
}

template <typename T>
std::array<std::vector<Sample<T>>, 3> ldr2hdr_dataset(const ManifestData& md, Split split, const TrainConfig& cfg) {
  std::array<std::vector<Sample<T>>, 3> out;
  for (const auto& f : md.manifest.files(split)) {
    const auto n = normalize_hdr(load_radiance(md.base / f)).map;
    const auto stack = make_stack(n, md.crf, md.manifest.ladder);
    for (int c = 0; c < 3; ++c) {
      auto s = ldr2hdr_samples<T>(stack, n, static_cast<RgbChannel>(c), cfg.patch, cfg.log_target);
      out[c].insert(out[c].end(), s.begin(), s.end());
    }
  }
  return out;
}

struct PairEntry {
  fs::path hdr, tm;
  Split split = Split::train;
};

inline std::vector<PairEntry> load_pairs(const std::string& path) {
  require(!path.empty(), ErrorCategory::usage, "--pairs <file> is required");
  const json j = read_json(path);
  const fs::path base = fs::path(path).parent_path();
  std::vector<PairEntry> out;
  try {
    for (const auto& e : j.at("pairs")) {
      fs::path hdr = e.at("hdr").get<std::string>(), tm = e.at("tm").get<std::string>();
      out.push_back({hdr.is_absolute() ? hdr : base / hdr, tm.is_absolute() ? tm : base / tm,
                     parse_split(e.value("split", "train"))});
    }
  } catch (const json::exception& e) {
    fail(ErrorCategory::validation, path + ": " + e.what());
  }
  return out;
}

template <typename T>
std::array<std::vector<Sample<T>>, 4> tonemap_dataset(const std::vector<PairEntry>& pairs, Split split,
                                                      const TrainConfig& cfg, const DecomposeParams& dp) {
  std::array<std::vector<Sample<T>>, 4> out;
  for (const auto& p : pairs) {
    if (p.split != split) continue;
    const auto d = decompose_tonemap_channels(normalize_hdr(load_radiance(p.hdr)).map, load_tone_map(p.tm), dp);
    for (int c = 0; c < 4; ++c) {
      auto s = tonemap_samples<T>(d, static_cast<TmChannel>(c), cfg.patch);
      out[c].insert(out[c].end(), s.begin(), s.end());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training / inference bodies, templated on the value type

template <typename T>
nn::Network<T> train_one(const nn::NetworkSpec& spec, const std::vector<Sample<T>>& train,
                         const std::vector<Sample<T>>& val, const TrainConfig& cfg, const std::string& label,
                         const fs::path& dir, Io& io) {
  require(!train.empty(), ErrorCategory::validation, "no training samples for " + label);
  Trainer<T> t(nn::Network<T>(spec), cfg);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    t.train_epoch(train, val.empty() ? nullptr : &val);
    const auto& row = t.curve().back();
    io.out << label << " epoch " << row.epoch << " loss " << row.mean_loss;
    if (row.val_loss) io.out << " val " << *row.val_loss;
    io.out << "\n";
  }
  write_out(dir, "curve_" + label + ".csv", curve_csv(t.curve()));
  return t.net();
}

template <typename T>
void train_ldr2hdr_impl(const ManifestData& md, const TrainConfig& cfg, const fs::path& dir, Io& io) {
  const auto train = ldr2hdr_dataset<T>(md, Split::train, cfg);
  const auto val = ldr2hdr_dataset<T>(md, Split::val, cfg);
  for (int c = 0; c < 3; ++c) {
    const auto ch = static_cast<RgbChannel>(c);
    TrainConfig cc = cfg;
    cc.seed = nn::stream_seed(cfg.seed, {0xC4, static_cast<std::uint64_t>(c)});
    const std::string label = "ldr2hdr_" + channel_name(ch);
    const auto net = train_one<T>(build_ldr2hdr_net(ch, cfg.seed, cfg.dropout_p), train[c], val[c], cc, label, dir, io);
    save_net(dir / (label + ".ckpt"), net,
             {{"arch", "ldr2hdr"}, {"channel", channel_name(ch)}, {"config", train_config_to_json(cfg)}});
  }
}

template <typename T>
void train_tonemap_impl(const std::vector<PairEntry>& pairs, const TrainConfig& cfg, const DecomposeParams& dp,
                        const fs::path& dir, Io& io) {
  const auto train = tonemap_dataset<T>(pairs, Split::train, cfg, dp);
  const auto val = tonemap_dataset<T>(pairs, Split::val, cfg, dp);
  for (int c = 0; c < 4; ++c) {
    const auto ch = static_cast<TmChannel>(c);
    TrainConfig cc = cfg;
    cc.seed = nn::stream_seed(cfg.seed, {0x7C, static_cast<std::uint64_t>(c)});
    const std::string label = "tonemap_" + channel_name(ch);
    const auto net = train_one<T>(build_tonemap_net(ch, cfg.seed, cfg.dropout_p), train[c], val[c], cc, label, dir, io);
    save_net(dir / (label + ".ckpt"), net,
             {{"arch", "tonemap"},
              {"channel", channel_name(ch)},
              {"sigma_s", dp.sigma_s},
              {"sigma_r", dp.sigma_r},
              {"config", train_config_to_json(cfg)}});
  }
}

template <typename T>
RadianceMap infer_ldr2hdr_impl(const fs::path& models, const StackFile& sf, Io& io) {
  std::array<nn::Network<T>, 3> nets;
  json meta;
  for (int c = 0; c < 3; ++c)
    nets[c] = load_net<T>(models / ("ldr2hdr_" + channel_name(static_cast<RgbChannel>(c)) + ".ckpt"), meta, io);
  const json cfg = meta.value("config", json::object());
  return infer_ldr2hdr(nets, sf.stack, sf.scale, cfg.value("log_target", false), cfg.value("patch", std::size_t{64}));
}

template <typename T>
ToneMap infer_tonemap_impl(const fs::path& models, const RadianceMap& map, Io& io) {
  std::array<nn::Network<T>, 4> nets;
  json meta;
  for (int c = 0; c < 4; ++c)
    nets[c] = load_net<T>(models / ("tonemap_" + channel_name(static_cast<TmChannel>(c)) + ".ckpt"), meta, io);
  DecomposeParams dp;
  dp.sigma_s = meta.value("sigma_s", dp.sigma_s);
  dp.sigma_r = meta.value("sigma_r", dp.sigma_r);
  return infer_tonemap(nets, map, meta.value("config", json::object()).value("patch", std::size_t{64}), dp);
}

template <typename T, typename Build>
std::vector<SearchResult> search_impl(const std::vector<Sample<T>>& train, const std::vector<Sample<T>>& val,
                                      const std::vector<double>& lrs, const std::vector<double>& dropouts,
                                      const TrainConfig& cfg, Build build) {
  std::vector<SearchCandidate> cands;
  for (double lr : lrs)
    for (double p : dropouts) {
      TrainConfig c = cfg;
      c.lr = lr;
      c.dropout_p = p;
      cands.push_back({"lr=" + format_double(lr) + ";dropout=" + format_double(p), build(p), c});
    }
  return hyperparam_search<T>(cands, train, val.empty() ? train : val);
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Io io{out, err};
  CLI::App app{"HDR acquisition and tone-mapping networks", "hdrnn"};
  app.require_subcommand(1, 1);
  Shared sh;
  app.add_option("--out", sh.out, "Output directory (every file is written below it)");
  sh.seed_opt = app.add_option("--seed", sh.seed, "Base RNG seed");
  app.add_option("--config", sh.config, "JSON file with TrainConfig keys")->check(CLI::ExistingFile);
  sh.workers_opt = app.add_option("--workers", sh.workers, "Data-parallel workers for training")->check(CLI::PositiveNumber);
  sh.dtype_opt = app.add_option("--dtype", sh.dtype, "Network value type")->check(CLI::IsMember({"f32", "f64"}));

  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };

  // synth
  std::size_t count = 8, n_val = 0, n_test = 0, width = 64, height = 64;
  double peak_mean = 8.0;
  auto* synth = sub("synth", "Write seeded synthetic HDR scenes (PFM) and a manifest");
  synth->add_option("--count", count, "Training scenes")->check(CLI::PositiveNumber);
  synth->add_option("--val", n_val, "Validation scenes");
  synth->add_option("--test", n_test, "Test scenes");
  synth->add_option("--width", width)->check(CLI::PositiveNumber);
  synth->add_option("--height", height)->check(CLI::PositiveNumber);
  synth->add_option("--peak-mean", peak_mean, "Mean blob peak radiance")->check(CLI::PositiveNumber);

  // expose
  std::string input, mode = "fixed", crf_spec;
  auto* expose_cmd = sub("expose", "Render a 5-image exposure stack from an HDR map");
  expose_cmd->add_option("--input", input, "HDR map (.hdr or .pfm)")->required();
  expose_cmd->add_option("--mode", mode)->check(CLI::IsMember({"fixed", "adaptive"}));
  expose_cmd->add_option("--crf", crf_spec, "identity, gamma:<g> or a CRF file");

  // merge
  std::string stack_path;
  auto* merge_cmd = sub("merge", "Debevec merge of a stack");
  merge_cmd->add_option("--stack", stack_path, "stack.json written by expose")->required();
  merge_cmd->add_option("--crf", crf_spec, "Override the stack's CRF");

  // tmo
  std::string op = "reinhard";
  auto* tmo_cmd = sub("tmo", "Apply one tone-mapping operator");
  tmo_cmd->add_option("--input", input)->required();
  tmo_cmd->add_option("--op", op)->check(CLI::IsMember({"reinhard", "drago", "mertens"}));
  tmo_cmd->add_option("--crf", crf_spec, "CRF for the Mertens stack");

  // select-tmo
  std::string manifest_path;
  auto* select_cmd = sub("select-tmo", "Pick the best operator per scene by TMQI");
  select_cmd->add_option("--manifest", manifest_path)->required();

  // tmqi
  std::string hdr_path, tm_path;
  auto* tmqi_cmd = sub("tmqi", "Score a tone map against its HDR source");
  tmqi_cmd->add_option("--hdr", hdr_path)->required();
  tmqi_cmd->add_option("--tm", tm_path, "8-bit PPM tone map")->required();

  // training
  double sigma_s = DecomposeParams{}.sigma_s, sigma_r = DecomposeParams{}.sigma_r;
  std::string pairs_path;
  auto* tl = sub("train-ldr2hdr", "Train the three per-channel radiance networks");
  tl->add_option("--manifest", manifest_path)->required();
  auto* tt = sub("train-tonemap", "Train the four decomposition networks");
  tt->add_option("--pairs", pairs_path, "pairs.json written by select-tmo")->required();
  tt->add_option("--sigma-s", sigma_s)->check(CLI::PositiveNumber);
  tt->add_option("--sigma-r", sigma_r)->check(CLI::PositiveNumber);

  // search
  std::string arch = "ldr2hdr";
  std::vector<double> lrs{1e-2, 1e-3}, dropouts{0.4};
  auto* search_cmd = sub("search", "Two-epoch hyperparameter sweep ranked by validation MSE");
  search_cmd->add_option("--arch", arch)->check(CLI::IsMember({"ldr2hdr", "tonemap"}));
  search_cmd->add_option("--manifest", manifest_path, "Dataset for --arch ldr2hdr");
  search_cmd->add_option("--pairs", pairs_path, "Dataset for --arch tonemap");
  search_cmd->add_option("--lr", lrs, "Learning rates")->delimiter(',');
  search_cmd->add_option("--dropout", dropouts, "Dropout probabilities")->delimiter(',');

  // inference
  std::string models;
  auto* il = sub("infer-ldr2hdr", "Reconstruct radiance from a stack");
  il->add_option("--models", models, "Directory with ldr2hdr_{R,G,B}.ckpt")->required();
  il->add_option("--stack", stack_path)->required();
  auto* it = sub("infer-tonemap", "Tone-map an HDR map with the trained networks");
  it->add_option("--models", models, "Directory with tonemap_*.ckpt")->required();
  it->add_option("--input", input)->required();

  // gradcheck
  std::string gc_arch = "all";
  double tolerance = 1e-4;
  std::size_t gc_size = 8, gc_batch = 2;
  auto* gc = sub("gradcheck", "Finite-difference gradient check of the architectures");
  gc->add_option("--arch", gc_arch)->check(CLI::IsMember({"ldr2hdr", "tonemap", "layers", "all"}));
  gc->add_option("--tolerance", tolerance)->check(CLI::PositiveNumber);
  gc->add_option("--size", gc_size, "Spatial input size")->check(CLI::PositiveNumber);
  gc->add_option("--batch", gc_batch)->check(CLI::PositiveNumber);

  if (!args.empty() && !args[0].empty() && args[0][0] != '-') {
    bool known = false;
    for (const auto* s : app.get_subcommands([](CLI::App*) { return true; })) known = known || s->get_name() == args[0];
    if (!known) {
      err << "error:usage: unknown subcommand '" << args[0] << "'\n";
      return 1;
    }
  }
  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error:usage: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*synth) {
      const auto dir = out_dir(sh);
      Manifest m;
      SynthParams sp;
      sp.width = width;
      sp.height = height;
      sp.blob_peak_mean = peak_mean;
      const std::size_t total = count + n_val + n_test;
      for (std::size_t k = 0; k < total; ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "scene_%03zu.pfm", k);
        save_radiance(dir / name, synthetic_scene(nn::stream_seed(sh.seed, {k}), sp));
        m.scenes.push_back({name, k < count ? Split::train : (k < count + n_val ? Split::val : Split::test)});
      }
      write_out(dir, "manifest.json", manifest_to_json(m));
      out << "wrote " << total << " scenes and manifest.json to " << dir.string() << "\n";
    } else if (*expose_cmd) {
      const auto dir = out_dir(sh);
      const auto n = normalize_hdr(load_radiance(input));
      const Crf crf = resolve_crf(crf_spec);
      const auto stack = make_stack(n.map, crf, mode == "fixed" ? LadderChoice::fixed : LadderChoice::adaptive);
      std::vector<std::string> files;
      for (std::size_t i = 0; i < stack.images.size(); ++i) {
        files.push_back("stack_" + std::to_string(i) + ".ppm");
        save_ldr(dir / files.back(), stack.images[i]);
      }
      write_out(dir, "stack.json", stack_json(stack, files, n.scale, crf_record(crf_spec), mode).dump(2) + "\n");
      out << "exposures:";
      for (double e : stack.exposures()) out << " " << format_double(e);
      out << "\n";
    } else if (*merge_cmd) {
      const auto dir = out_dir(sh);
      const auto sf = load_stack(stack_path);
      const Crf crf = resolve_crf(crf_spec.empty() ? sf.crf : crf_spec);
      save_radiance(dir / "merged.pfm", denormalize(debevec_merge(sf.stack, crf), sf.scale));
      out << "wrote merged.pfm\n";
    } else if (*tmo_cmd) {
      const auto dir = out_dir(sh);
      TmoParams p;
      p.crf = resolve_crf(crf_spec);
      save_tone_map(dir / (op + ".ppm"), apply_tmo(parse_tmo(op), normalize_hdr(load_radiance(input)).map, p));
      out << "wrote " << op << ".ppm\n";
    } else if (*select_cmd) {
      const auto dir = out_dir(sh);
      const auto md = load_manifest(manifest_path);
      TmoParams p;
      p.crf = md.crf;
      std::string table = tmqi_csv_header(), selection = "image,operator,Q\n";
      json pairs = json::array();
      for (const auto& e : md.manifest.scenes) {
        const auto hdr = md.base / e.file;
        const auto sel = select_best_tmo(normalize_hdr(load_radiance(hdr)).map, all_tmos(), p);
        for (const auto& c : sel.candidates) table += tmqi_csv_row(e.file, tmo_name(c.kind), c.score);
        const std::string tm_name = "tonemaps/" + fs::path(e.file).stem().string() + ".ppm";
        save_tone_map(dir / tm_name, sel.tone_map);
        selection += e.file + "," + tmo_name(sel.kind) + "," + format_double(sel.score.Q) + "\n";
        pairs.push_back({{"hdr", fs::absolute(hdr).lexically_normal().string()},
                         {"tm", tm_name},
                         {"operator", tmo_name(sel.kind)},
                         {"split", split_name(e.split)}});
      }
      write_out(dir, "tmqi.csv", table);
      write_out(dir, "selection.csv", selection);
      write_out(dir, "pairs.json", json{{"pairs", pairs}}.dump(2) + "\n");
      out << selection;
    } else if (*tmqi_cmd) {
      const auto s = tmqi(load_radiance(hdr_path), load_tone_map(tm_path));
      const std::string csv = tmqi_csv_header() + tmqi_csv_row(fs::path(tm_path).filename().string(), "-", s);
      out << csv;
      if (!sh.out.empty()) write_out(out_dir(sh), "tmqi.csv", csv);
    } else if (*tl) {
      const auto dir = out_dir(sh);
      const auto cfg = resolve_config(sh);
      const auto md = load_manifest(manifest_path);
      if (cfg.dtype == Dtype::f32) train_ldr2hdr_impl<float>(md, cfg, dir, io);
      else train_ldr2hdr_impl<double>(md, cfg, dir, io);
    } else if (*tt) {
      const auto dir = out_dir(sh);
      const auto cfg = resolve_config(sh);
      const DecomposeParams dp{sigma_s, sigma_r};
      const auto pairs = load_pairs(pairs_path);
      if (cfg.dtype == Dtype::f32) train_tonemap_impl<float>(pairs, cfg, dp, dir, io);
      else train_tonemap_impl<double>(pairs, cfg, dp, dir, io);
    } else if (*search_cmd) {
      const auto dir = out_dir(sh);
      const auto cfg = resolve_config(sh);
      require(!lrs.empty() && !dropouts.empty(), ErrorCategory::usage, "search: empty --lr or --dropout list");
      std::vector<SearchResult> res;
      auto go = [&]<typename T>(T) {
        if (arch == "ldr2hdr") {
          const auto md = load_manifest(manifest_path);
          const auto tr = ldr2hdr_dataset<T>(md, Split::train, cfg);
          const auto va = ldr2hdr_dataset<T>(md, Split::val, cfg);
          res = search_impl<T>(tr[1], va[1], lrs, dropouts, cfg,
                               [&](double p) { return build_ldr2hdr_net(RgbChannel::G, cfg.seed, p); });
        } else {
          const auto pairs = load_pairs(pairs_path);
          const auto tr = tonemap_dataset<T>(pairs, Split::train, cfg, {});
          const auto va = tonemap_dataset<T>(pairs, Split::val, cfg, {});
          res = search_impl<T>(tr[0], va[0], lrs, dropouts, cfg,
                               [&](double p) { return build_tonemap_net(TmChannel::L_base, cfg.seed, p); });
        }
      };
      if (cfg.dtype == Dtype::f32) go(float{});
      else go(double{});
      const auto csv = search_report_csv(res);
      write_out(dir, "search.csv", csv);
      out << csv;
    } else if (*il) {
      const auto dir = out_dir(sh);
      const auto sf = load_stack(stack_path);
      const Dtype dt = parse_dtype(sh.dtype);
      const auto map = dt == Dtype::f32 ? infer_ldr2hdr_impl<float>(models, sf, io) : infer_ldr2hdr_impl<double>(models, sf, io);
      save_radiance(dir / "ldr2hdr.pfm", map);
      out << "wrote ldr2hdr.pfm (" << map.width << "x" << map.height << ")\n";
    } else if (*it) {
      const auto dir = out_dir(sh);
      const auto map = load_radiance(input);
      const Dtype dt = parse_dtype(sh.dtype);
      const auto tm = dt == Dtype::f32 ? infer_tonemap_impl<float>(models, map, io) : infer_tonemap_impl<double>(models, map, io);
      save_tone_map(dir / "tonemap.ppm", tm);
      RadianceMap as_float(tm.width, tm.height);
      as_float.data = tm.data;
      save_radiance(dir / "tonemap.pfm", as_float);
      out << "wrote tonemap.ppm (" << tm.width << "x" << tm.height << ")\n";
    } else if (*gc) {
      nn::GradCheckOptions opt;
      opt.tolerance = tolerance;
      std::vector<std::pair<std::string, nn::NetworkSpec>> specs;
      if (gc_arch == "layers" || gc_arch == "all") {
        for (auto k : {nn::LayerKind::conv3x3, nn::LayerKind::conv1x1})
          for (bool bn : {false, true}) {
            nn::NetworkSpec s;
            s.seed = nn::stream_seed(sh.seed, {specs.size()});
            s.layers.push_back({k, 3, 6, bn, 0.0});
            s.layers.push_back({nn::LayerKind::output1x1, 6, 1, false, 0.0});
            specs.push_back({nn::kind_name(k) + (bn ? "+bn" : ""), s});
          }
      }
      if (gc_arch == "ldr2hdr" || gc_arch == "all") specs.push_back({"ldr2hdr", build_ldr2hdr_net(RgbChannel::R, sh.seed)});
      if (gc_arch == "tonemap" || gc_arch == "all")
        specs.push_back({"tonemap", build_tonemap_net(TmChannel::L_base, sh.seed)});
      std::ostringstream report;
      std::vector<std::string> failed;
      for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto r = nn::grad_check_spec(specs[i].second, gc_batch, gc_size, nn::stream_seed(sh.seed, {0x6C, i}), opt);
        report << "== " << specs[i].first << "\n" << r.str();
        if (!r.passed) failed.push_back(specs[i].first);
      }
      out << report.str();
      if (!sh.out.empty()) write_out(out_dir(sh), "gradcheck.txt", report.str());
      if (!failed.empty()) {
        std::string names;
        for (const auto& f : failed) names += (names.empty() ? "" : ",") + f;
        fail(ErrorCategory::numeric, "gradient check failed for " + names);
      }
    }
  } catch (const Error& e) {
    err << "error:" << category_name(e.category()) << ": " << e.what() << "\n";
    return e.category() == ErrorCategory::io ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error:internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace hdrnn::cli
