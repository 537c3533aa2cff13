#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "evfuse/errors.hpp"
#include "evfuse/fusion.hpp"
#include "evfuse/mixing.hpp"
#include "evfuse/npy.hpp"
#include "evfuse/trainer.hpp"
#include "evfuse/uncertainty.hpp"
#include "evfuse/vwal.hpp"

namespace evfuse::cli {

namespace {

using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

struct Summary {
  std::string command;
  Json inputs = Json::object();
  Json outputs = Json::object();
  Json stats = Json::object();
};

Json span_stats(std::span<const float> values) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double sum = 0.0;
  for (float v : values) {
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
    sum += v;
  }
  return Json{{"min", lo}, {"mean", sum / static_cast<double>(values.size())}, {"max", hi}};
}

Json to_json(const StepLosses& l) {
  return Json{{"objective", l.objective},
              {"labeled", l.labeled},
              {"labeled_weighted", l.labeled_weighted},
              {"unlabeled", l.unlabeled},
              {"unlabeled_weighted", l.unlabeled_weighted}};
}

Json to_json(const EvalMetrics& m) { return Json{{"dice", m.dice}, {"jaccard", m.jaccard}}; }

Json envelope(const Summary& s, double elapsed_ms) {
  return Json{{"command", s.command},
              {"inputs", s.inputs},
              {"outputs", s.outputs},
              {"stats", s.stats},
              {"elapsed_ms", elapsed_ms}};
}

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

RankOrder parse_order(const std::string& s) {
  if (s == "asc" || s == "ascending") return RankOrder::AscendingUncertainty;
  if (s == "desc" || s == "descending") return RankOrder::DescendingUncertainty;
  throw ContractError("order must be asc or desc, got '" + s + "'");
}

Extent3 to_extent(const std::vector<std::size_t>& v, const char* what) {
  if (v.size() != 3) throw ContractError(std::string(what) + " needs three comma-separated sizes");
  return {v[0], v[1], v[2]};
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// P5 graymap of one axial slice (fixed last spatial index), min-max scaled.
void write_pgm(const std::string& path, std::size_t width, std::size_t height, const std::vector<double>& pixels) {
  const auto [lo, hi] = std::minmax_element(pixels.begin(), pixels.end());
  const double range = *hi - *lo;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "P5\n" << width << ' ' << height << "\n255\n";
  for (double p : pixels) {
    const double t = range > 0.0 ? (p - *lo) / range : 0.0;
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Contract:
    case ErrorKind::Shape:
      return kValidation;
    case ErrorKind::Format:
    case ErrorKind::UnsupportedEncoding:
    case ErrorKind::Corruption:
    case ErrorKind::Io:
      return kIo;
    case ErrorKind::Domain:
    case ErrorKind::TotalConflict:
    case ErrorKind::Training:
      return kNumerical;
  }
  return kIo;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evidential fusion pipeline tools", "evfuse"};
  app.require_subcommand(1);

  // Each subcommand registers a handler; options bind into these locals.
  std::function<void(Summary&, std::ostream&, Clock::time_point)> handler;

  // fuse
  std::string fa, fb, fout;
  bool no_renorm = false;
  auto* fuse = app.add_subcommand("fuse", "IPAF fusion of two normalized belief volumes");
  fuse->add_option("--a", fa, "original belief volume")->required();
  fuse->add_option("--b", fb, "restored belief volume")->required();
  fuse->add_option("--out", fout, "fused output")->required();
  fuse->add_flag("--no-renorm", no_renorm, "keep the raw (unnormalized) fused masses");
  fuse->callback([&] {
    handler = [&](Summary& s, std::ostream&, Clock::time_point) {
      s.inputs = {{"a", fa}, {"b", fb}};
      FusionConfig cfg;
      cfg.renormalize_output = !no_renorm;
      const BeliefVolume a(load_tensor(fa), true);
      const BeliefVolume b(load_tensor(fb), true);
      const auto f = fuse_volumes(a, b, cfg);
      save_tensor(f.grid(), fout);
      s.outputs = {{"fused", fout}};
      std::vector<float> totals(f.voxel_count());
      std::vector<float> composite(f.voxel_count());
      for (std::size_t v = 0; v < totals.size(); ++v) {
        const auto m = f.voxel(v);
        double t = 0.0;
        for (float x : m) t += x;
        totals[v] = static_cast<float>(t);
        composite[v] = m.back();
      }
      s.stats = {{"voxels", f.voxel_count()},
                 {"classes", f.num_classes()},
                 {"renormalized", cfg.renormalize_output},
                 {"total_mass", span_stats(totals)},
                 {"composite", span_stats(composite)}};
    };
  });

  // uncertainty
  std::string uin, uout;
  bool raw_delta = false;
  auto* unc = app.add_subcommand("uncertainty", "Entropy-scaled uncertainty of a normalized belief volume");
  unc->add_option("--in", uin, "belief volume")->required();
  unc->add_option("--out", uout, "uncertainty volume")->required();
  unc->add_flag("--raw-delta", raw_delta, "take the entropy over raw singleton masses");
  unc->callback([&] {
    handler = [&](Summary& s, std::ostream&, Clock::time_point) {
      s.inputs = {{"in", uin}};
      const BeliefVolume b(load_tensor(uin), true);
      const auto u = uncertainty_volume(b, raw_delta ? EntropyBasis::RawSingletons
                                                     : EntropyBasis::NormalizedSingletons);
      save_tensor(u.grid(), uout);
      s.outputs = {{"uncertainty", uout}};
      s.stats = span_stats(u.data());
      s.stats["basis"] = raw_delta ? "raw" : "normalized";
    };
  });

  // weights
  std::string wu, wout, worder = "asc";
  std::size_t wepoch = 0, wepochs = 0;
  double weps = 1.0;
  auto* wts = app.add_subcommand("weights", "Rank-based voxel weights for one epoch");
  wts->add_option("--u", wu, "uncertainty volume")->required();
  wts->add_option("--epoch", wepoch, "current epoch h (1-based)")->required();
  wts->add_option("--epochs", wepochs, "total epochs H")->required();
  wts->add_option("--epsilon", weps, "weight ceiling");
  wts->add_option("--order", worder, "rank order: asc or desc");
  wts->add_option("--out", wout, "weight volume");
  wts->callback([&] {
    handler = [&](Summary& s, std::ostream&, Clock::time_point) {
      const WeightSchedule sched{weps, wepoch, wepochs, parse_order(worder)};
      sched.validate();
      s.inputs = {{"u", wu}};
      const UncertaintyVolume u(load_tensor(wu));
      const auto w = weight_volume(u, sched);
      if (!wout.empty()) {
        save_tensor(w, wout);
        s.outputs = {{"weights", wout}};
      }
      s.stats = span_stats(w.data());
      s.stats["zeta"] = sched.progress();
      s.stats["order"] = sched.order == RankOrder::AscendingUncertainty ? "asc" : "desc";
    };
  });

  // mix
  std::string ma, mb, mouta, moutb, mmask;
  std::vector<std::size_t> mzero;
  std::uint64_t mseed = 0;
  auto* mix = app.add_subcommand("mix", "Copy-paste exchange of one random box between two volumes");
  mix->add_option("--a", ma, "first volume")->required();
  mix->add_option("--b", mb, "second volume")->required();
  mix->add_option("--zero-size", mzero, "zero box size w,h,l")->required()->delimiter(',');
  mix->add_option("--seed", mseed, "mask placement seed")->required();
  mix->add_option("--out-a", mouta, "mixed first volume")->required();
  mix->add_option("--out-b", moutb, "mixed second volume")->required();
  mix->add_option("--out-mask", mmask, "mask tensor ('|u1')")->required();
  mix->callback([&] {
    handler = [&](Summary& s, std::ostream&, Clock::time_point) {
      const Extent3 zero = to_extent(mzero, "--zero-size");
      s.inputs = {{"a", ma}, {"b", mb}};
      const auto a = load_tensor(ma);
      const auto b = load_tensor(mb);
      const auto mask = generate_mask(a.extent(), zero, mseed);
      const auto pair = mix_pair(a, b, mask);
      save_tensor(pair.mixed_a, mouta);
      save_tensor(pair.mixed_b, moutb);
      save_mask(mask, mmask);
      s.outputs = {{"a", mouta}, {"b", moutb}, {"mask", mmask}};
      const auto& box = mask.zero_region();
      s.stats = {{"zero_origin", box.origin}, {"zero_size", box.size}, {"zero_voxels", mask.zero_count()},
                 {"seed", mseed}};
    };
  });

  // restore
  std::string ra, rb, rmask, routa, routb;
  auto* rst = app.add_subcommand("restore", "Return mixed voxels to their source volumes");
  rst->add_option("--a", ra, "first mixed volume or prediction")->required();
  rst->add_option("--b", rb, "second mixed volume or prediction")->required();
  rst->add_option("--mask", rmask, "mask used for mixing")->required();
  rst->add_option("--out-a", routa, "restored first volume")->required();
  rst->add_option("--out-b", routb, "restored second volume")->required();
  rst->callback([&] {
    handler = [&](Summary& s, std::ostream&, Clock::time_point) {
      s.inputs = {{"a", ra}, {"b", rb}, {"mask", rmask}};
      const auto mask = load_mask(rmask);
      auto a = load_tensor(ra);
      auto b = load_tensor(rb);
      if (a.rank() == 4) {
        const auto [pa, pb] =
            restore_predictions(BeliefVolume::from_grid(std::move(a)), BeliefVolume::from_grid(std::move(b)), mask);
        save_tensor(pa.grid(), routa);
        save_tensor(pb.grid(), routb);
      } else {
        const auto pair = mix_pair(a, b, mask);
        save_tensor(pair.mixed_a, routa);
        save_tensor(pair.mixed_b, routb);
      }
      s.outputs = {{"a", routa}, {"b", routb}};
      s.stats = {{"voxels", voxel_count(mask.extent())}, {"exchanged_voxels", mask.zero_count()}};
    };
  });

  // train-toy
  std::string tconfig, tmodel, tmetrics;
  std::uint64_t tseed = 1;
  auto* train = app.add_subcommand("train-toy", "Pre-train and self-train the toy model on synthetic volumes");
  train->add_option("--config", tconfig, "key=value config file");
  auto* seed_opt = train->add_option("--seed", tseed, "run seed (overrides the config)");
  train->add_option("--out-model", tmodel, "directory for the trained student bundle");
  train->add_option("--metrics", tmetrics, "JSON-lines file of per-epoch metrics");
  train->callback([&] {
    handler = [&](Summary& s, std::ostream& o, Clock::time_point start) {
      ToyRunConfig cfg;
      if (!tconfig.empty()) {
        s.inputs["config"] = tconfig;
        cfg = parse_toy_config(read_text(tconfig));
      }
      if (seed_opt->count() > 0) cfg.train.seed = tseed;
      cfg.train.validate();
      std::ofstream metrics;
      if (!tmetrics.empty()) {
        metrics.open(tmetrics);
        if (!metrics) throw IoError("cannot open '" + tmetrics + "' for writing");
      }
      const auto result = run_toy(cfg, [&](const EpochRecord& r) {
        Json line{{"stage", to_string(r.stage)}, {"epoch", r.epoch}, {"losses", to_json(r.mean)}};
        if (metrics.is_open()) metrics << line.dump() << '\n';
        Summary epoch{"train-toy"};
        epoch.inputs = s.inputs;
        epoch.stats = std::move(line);
        o << envelope(epoch, ms_since(start)).dump() << '\n';
      });
      if (!tmodel.empty()) {
        save_model(result.student, tmodel);
        s.outputs["model"] = tmodel;
      }
      s.stats = {{"seed", cfg.train.seed},
                 {"pretrain", to_json(result.pretrain_metrics)},
                 {"student", to_json(result.student_metrics)},
                 {"teacher", to_json(result.teacher_metrics)}};
      if (metrics.is_open()) {
        metrics << Json{{"final", s.stats}}.dump() << '\n';
        s.outputs["metrics"] = tmetrics;
      }
    };
  });

  // eval
  std::string emodel;
  std::size_t ecount = 10, esize = 24;
  std::uint64_t eseed = 1;
  auto* ev = app.add_subcommand("eval", "Dice and Jaccard of a model bundle on fresh synthetic volumes");
  ev->add_option("--model", emodel, "model bundle directory")->required();
  ev->add_option("--count", ecount, "number of volumes");
  ev->add_option("--seed", eseed, "data seed");
  ev->add_option("--volume-size", esize, "cube edge length");
  ev->callback([&] {
    handler = [&](Summary& s, std::ostream&, Clock::time_point) {
      if (ecount == 0) throw ContractError("--count must be positive");
      s.inputs = {{"model", emodel}};
      const auto model = load_model(emodel);
      const auto samples = generate_samples(ecount, eseed, {esize, esize, esize});
      s.stats = to_json(evaluate(model, samples));
      s.stats["count"] = ecount;
      s.stats["seed"] = eseed;
    };
  });

  // slice-export
  std::string sin, sout;
  std::size_t schannel = 0;
  std::ptrdiff_t sslice = -1;
  auto* slc = app.add_subcommand("slice-export", "Write one axial slice of a tensor as a PGM image");
  slc->add_option("--in", sin, "tensor file")->required();
  slc->add_option("--out", sout, "PGM output")->required();
  slc->add_option("--slice", sslice, "index along the last spatial axis (default: middle)");
  slc->add_option("--channel", schannel, "channel of a rank-4 tensor");
  slc->callback([&] {
    handler = [&](Summary& s, std::ostream&, Clock::time_point) {
      s.inputs = {{"in", sin}};
      const auto arr = npy::read(sin);
      const auto& shape = arr.header.shape;
      if (shape.size() != 3 && shape.size() != 4) throw ShapeError("slice-export needs a rank-3 or rank-4 tensor");
      const std::size_t channels = shape.size() == 4 ? shape[3] : 1;
      const std::size_t z = sslice < 0 ? shape[2] / 2 : static_cast<std::size_t>(sslice);
      if (z >= shape[2]) throw ContractError("--slice is out of range");
      if (schannel >= channels) throw ContractError("--channel is out of range");
      std::vector<double> pixels;
      pixels.reserve(shape[0] * shape[1]);
      for (std::size_t x = 0; x < shape[0]; ++x) {
        for (std::size_t y = 0; y < shape[1]; ++y) {
          const std::size_t i = ((x * shape[1] + y) * shape[2] + z) * channels + schannel;
          if (arr.header.dtype == npy::Dtype::Float32) {
            float f;
            std::memcpy(&f, arr.payload.data() + i * sizeof(float), sizeof(float));
            pixels.push_back(f);
          } else {
            pixels.push_back(static_cast<double>(std::to_integer<int>(arr.payload[i])));
          }
        }
      }
      // rows follow the first axis, columns the second
      write_pgm(sout, shape[1], shape[0], pixels);
      s.outputs = {{"image", sout}};
      s.stats = {{"slice", z}, {"channel", schannel}, {"width", shape[1]}, {"height", shape[0]}};
    };
  });

  const auto start = Clock::now();
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }

  Summary summary;
  summary.command = app.get_subcommands().front()->get_name();
  try {
    handler(summary, out, start);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  }
  out << envelope(summary, ms_since(start)).dump() << '\n';
  return kOk;
}

}  // namespace evfuse::cli
