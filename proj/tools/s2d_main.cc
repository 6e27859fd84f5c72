#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "s2d/config.h"
#include "s2d/error.h"
#include "s2d/io.h"
#include "s2d/matching.h"
#include "s2d/parallel.h"
#include "s2d/pipeline.h"
#include "s2d/pose.h"
#include "s2d/retrieval.h"
#include "s2d/synth.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNoneLocalized = 3;

constexpr const char* kConfigEcho = "run_config.txt";

struct ConfigFlags {
  s2d::RunConfig config;
  std::string config_file;
  std::vector<std::pair<CLI::Option*, std::function<void(s2d::RunConfig&)>>> overrides;
  s2d::RunConfig parsed;  // flag storage
};

template <typename T>
void AddField(CLI::App* app, ConfigFlags& flags, const std::string& name,
              T s2d::RunConfig::*field, const std::string& help) {
  CLI::Option* opt = app->add_option("--" + name, flags.parsed.*field, help);
  flags.overrides.emplace_back(opt, [&flags, field](s2d::RunConfig& c) {
    c.*field = flags.parsed.*field;
  });
}

void AddConfigFlags(CLI::App* app, ConfigFlags& flags) {
  app->add_option("--config", flags.config_file, "key = value run configuration file")
      ->check(CLI::ExistingFile);
  AddField(app, flags, "n-neighbors", &s2d::RunConfig::n_neighbors,
           "retrieved reference images per query");
  AddField(app, flags, "alpha", &s2d::RunConfig::alpha, "ratio test threshold");
  AddField(app, flags, "fraction", &s2d::RunConfig::fraction,
           "ratio test rank fraction");
  AddField(app, flags, "inlier-threshold-px", &s2d::RunConfig::inlier_threshold_px,
           "RANSAC inlier threshold in pixels");
  AddField(app, flags, "min-inliers", &s2d::RunConfig::min_inliers,
           "minimum inliers for an accepted pose");
  AddField(app, flags, "confidence", &s2d::RunConfig::confidence,
           "RANSAC stopping confidence");
  AddField(app, flags, "max-iterations", &s2d::RunConfig::max_iterations,
           "RANSAC iteration cap");
  AddField(app, flags, "seed", &s2d::RunConfig::seed, "random seed");
  AddField(app, flags, "refinement", &s2d::RunConfig::refinement,
           "refine RANSAC poses on their inliers (true/false)");
  AddField(app, flags, "pca-dim", &s2d::RunConfig::pca_dim,
           "global descriptor PCA dimension");
  AddField(app, flags, "local-pca-dim", &s2d::RunConfig::local_pca_dim,
           "local descriptor PCA dimension (0 = off)");
  AddField(app, flags, "fallback-retrieval-pose", &s2d::RunConfig::fallback_retrieval_pose,
           "report the top retrieved pose for unlocalized queries (true/false)");
}

s2d::RunConfig ResolveConfig(const ConfigFlags& flags) {
  s2d::RunConfig config;
  if (!flags.config_file.empty()) {
    s2d::ApplyRunConfigText(s2d::io::ReadTextFile(flags.config_file), config);
  }
  for (const auto& [opt, apply] : flags.overrides) {
    if (opt->count() > 0) apply(config);
  }
  config.Validate();
  return config;
}

void EchoConfig(const fs::path& dir, const s2d::RunConfig& config) {
  s2d::io::WriteTextFile(dir / kConfigEcho, s2d::FormatRunConfig(config));
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  std::string out;
  s2d::synth::SceneOptions scene;
  s2d::synth::TensorOptions tensors;
  std::string background = "random";
};

int RunSynth(const SynthArgs& args, const s2d::RunConfig& config) {
  s2d::synth::TensorOptions tensor_opts = args.tensors;
  tensor_opts.noise.background = args.background == "orthogonal"
                                     ? s2d::synth::BackgroundMode::kOrthogonal
                                     : s2d::synth::BackgroundMode::kRandomUnit;
  const auto scene = s2d::synth::GenScene(config.seed, args.scene);
  const auto tensors = s2d::synth::GenFeatureTensors(scene, tensor_opts);
  const auto refs = s2d::synth::MakeReferenceEntries(scene, tensors);
  const auto queries = s2d::synth::MakeQueryInputs(scene, tensors);

  const fs::path out(args.out);
  fs::create_directories(out / "references");
  fs::create_directories(out / "queries");

  std::vector<s2d::io::ManifestEntry> manifest;
  for (const auto& ref : refs) {
    s2d::io::ManifestEntry e;
    e.id = ref.id;
    e.global_path = "references/" + ref.id + ".global.bin";
    e.sparse_path = "references/" + ref.id + ".sparse.bin";
    e.kplm_path = "references/" + ref.id + ".kplm.bin";
    e.intrinsics = ref.intrinsics;
    e.image = ref.image;
    e.pose = ref.pose;
    std::vector<s2d::io::KeypointLandmark> kplm;
    for (std::size_t i = 0; i < ref.keypoints.size(); ++i) {
      kplm.push_back({ref.keypoints[i], ref.landmarks[i]});
    }
    s2d::io::WriteFile(out / e.global_path,
                       s2d::io::EncodeGlobalDescriptor(ref.global.values));
    s2d::io::WriteFile(out / e.sparse_path,
                       s2d::io::EncodeSparseDescriptors(ref.descriptors));
    s2d::io::WriteFile(out / e.kplm_path, s2d::io::EncodeKeypointsLandmarks(kplm));
    manifest.push_back(std::move(e));
  }
  s2d::io::WriteTextFile(out / "references.txt", s2d::io::FormatManifest(manifest));

  std::vector<s2d::io::QueryListEntry> query_list;
  for (const auto& q : queries) {
    s2d::io::QueryListEntry e;
    e.id = q.id;
    e.dense_path = "queries/" + q.id + ".dense.bin";
    e.global_path = "queries/" + q.id + ".global.bin";
    e.intrinsics = q.intrinsics;
    e.image = q.image;
    s2d::io::WriteFile(out / e.dense_path, s2d::io::EncodeFeatureGrid(q.dense));
    s2d::io::WriteFile(out / e.global_path,
                       s2d::io::EncodeGlobalDescriptor(q.global.values));
    query_list.push_back(std::move(e));
  }
  s2d::io::WriteTextFile(out / "queries.txt", s2d::io::FormatQueryList(query_list));

  std::string gt;
  for (const auto& [id, pose] : s2d::synth::QueryGroundTruth(scene)) {
    gt += s2d::io::FormatPoseLine(id, pose);
  }
  s2d::io::WriteTextFile(out / "gt_poses.txt", gt);
  EchoConfig(out, config);
  std::printf("wrote %zu references and %zu queries to %s\n", refs.size(),
              queries.size(), out.string().c_str());
  return kExitOk;
}

// ---- build-db -------------------------------------------------------------

int RunBuildDb(const std::string& input_manifest, const std::string& out_dir,
               const s2d::RunConfig& config) {
  const fs::path manifest_path(input_manifest);
  const fs::path in_dir = manifest_path.parent_path();
  const auto entries =
      s2d::io::ParseManifest(s2d::io::ReadTextFile(manifest_path));
  auto refs = s2d::io::LoadReferences(entries, in_dir);
  S2D_CHECK(refs.size() >= 2, s2d::ErrorCode::kInsufficientSamples,
            "need at least two references to fit PCA");

  std::vector<std::vector<float>> globals;
  for (const auto& ref : refs) globals.push_back(ref.global.values);
  const int global_in = static_cast<int>(globals.front().size());
  const int global_dim = std::min({config.pca_dim, static_cast<int>(refs.size()) - 1,
                                   global_in});
  const auto global_pca = s2d::FitPca(globals, global_dim);

  std::optional<s2d::PcaModel> local_pca;
  if (config.local_pca_dim > 0) {
    std::vector<std::vector<float>> locals;
    for (const auto& ref : refs) {
      for (const auto& d : ref.descriptors) locals.push_back(d.values);
    }
    S2D_CHECK(locals.size() >= 2, s2d::ErrorCode::kInsufficientSamples,
              "need at least two local descriptors to fit local PCA");
    const int local_dim =
        std::min({config.local_pca_dim, static_cast<int>(locals.size()) - 1,
                  static_cast<int>(locals.front().size())});
    local_pca = s2d::FitPca(locals, local_dim);
  }

  const fs::path out(out_dir);
  fs::create_directories(out / "references");
  std::vector<s2d::io::ManifestEntry> manifest;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& ref = refs[i];
    s2d::io::ManifestEntry e = entries[i];
    e.global_path = "references/" + ref.id + ".global.bin";
    e.sparse_path = "references/" + ref.id + ".sparse.bin";
    e.kplm_path = "references/" + ref.id + ".kplm.bin";
    const auto projected = s2d::ApplyPca(global_pca, ref.global.values);
    s2d::io::WriteFile(out / e.global_path,
                       s2d::io::EncodeGlobalDescriptor(projected.values));
    std::vector<s2d::SparseDescriptor> sparse = ref.descriptors;
    if (local_pca) {
      for (auto& d : sparse) {
        std::vector<float> reduced(local_pca->output_dim());
        s2d::TryApplyPca(*local_pca, d.values, reduced);
        d.values = std::move(reduced);
      }
    }
    s2d::io::WriteFile(out / e.sparse_path, s2d::io::EncodeSparseDescriptors(sparse));
    std::vector<s2d::io::KeypointLandmark> kplm;
    for (std::size_t k = 0; k < ref.keypoints.size(); ++k) {
      kplm.push_back({ref.keypoints[k], ref.landmarks[k]});
    }
    s2d::io::WriteFile(out / e.kplm_path, s2d::io::EncodeKeypointsLandmarks(kplm));
    manifest.push_back(std::move(e));
  }
  s2d::io::WriteTextFile(out / "manifest.txt", s2d::io::FormatManifest(manifest));
  s2d::io::WriteFile(out / "pca_global.bin", s2d::io::EncodePcaModel(global_pca));
  if (local_pca) {
    s2d::io::WriteFile(out / "pca_local.bin", s2d::io::EncodePcaModel(*local_pca));
  } else {
    fs::remove(out / "pca_local.bin");
  }
  EchoConfig(out, config);
  std::printf("database: %zu references, global dim %d -> %d\n", refs.size(),
              global_in, global_dim);
  return kExitOk;
}

// ---- localize -------------------------------------------------------------

s2d::FeatureGrid ProjectGrid(const s2d::PcaModel& pca, const s2d::FeatureGrid& grid) {
  S2D_CHECK(grid.channels() == pca.input_dim(), s2d::ErrorCode::kDimensionMismatch,
            "query grid channels do not match the local PCA input");
  s2d::FeatureGrid out(grid.width(), grid.height(), pca.output_dim());
  s2d::ParallelFor(0, grid.num_cells(), 64, [&](std::size_t i) {
    s2d::TryApplyPca(pca, grid.Cell(i), out.MutableCell(i));
  });
  return out;
}

int RunLocalize(const std::string& db_dir, const std::string& query_list_path,
                const std::string& out_csv, const s2d::RunConfig& config) {
  const fs::path db(db_dir);
  const auto entries = s2d::io::ParseManifest(s2d::io::ReadTextFile(db / "manifest.txt"));
  const auto global_pca =
      s2d::io::DecodePcaModel(s2d::io::ReadFile(db / "pca_global.bin"));
  std::optional<s2d::PcaModel> local_pca;
  if (fs::exists(db / "pca_local.bin")) {
    local_pca = s2d::io::DecodePcaModel(s2d::io::ReadFile(db / "pca_local.bin"));
  }
  const s2d::Localizer localizer(s2d::io::LoadReferences(entries, db));

  const fs::path list_path(query_list_path);
  const auto query_entries =
      s2d::io::ParseQueryList(s2d::io::ReadTextFile(list_path));
  const auto options = config.ToLocalizeOptions();

  std::vector<s2d::LocalizationResult> results;
  int localized = 0;
  for (const auto& entry : query_entries) {
    auto query = s2d::io::LoadQuery(entry, list_path.parent_path());
    query.global = s2d::ApplyPca(global_pca, query.global.values);
    if (local_pca) query.dense = ProjectGrid(*local_pca, query.dense);
    auto result = localizer.Localize(query, options);
    if (config.fallback_retrieval_pose) {
      s2d::ApplyRetrievalFallback(query, localizer, result);
    }
    if (result.pose) ++localized;
    results.push_back(std::move(result));
  }

  const fs::path out(out_csv);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  s2d::io::WriteTextFile(out, s2d::io::FormatResultsCsv(results));
  EchoConfig(out.has_parent_path() ? out.parent_path() : fs::path("."), config);
  std::printf("localized %d/%zu queries\n", localized, results.size());
  return localized == 0 && !results.empty() ? kExitNoneLocalized : kExitOk;
}

// ---- evaluate -------------------------------------------------------------

int RunEvaluate(const std::string& results_path, const std::string& gt_path,
                const std::string& json_path) {
  const auto results = s2d::io::ParseResultsCsv(s2d::io::ReadTextFile(results_path));
  std::map<std::string, s2d::Pose> gt;
  for (auto& [id, pose] : s2d::io::ParsePoseFile(s2d::io::ReadTextFile(gt_path))) {
    gt.emplace(id, pose);
  }
  const auto thresholds = s2d::DefaultRecallThresholds();
  const auto report = s2d::EvaluateRecall(results, gt, thresholds);
  std::fputs(s2d::io::FormatRecallTable(report).c_str(), stdout);
  if (!json_path.empty()) {
    s2d::io::WriteTextFile(json_path, s2d::io::FormatRecallJson(report));
  }
  return kExitOk;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
  int width = 128;
  int height = 128;
  int channels = 2304;
  int descriptors = 32;
  int ransac_trials = 20;
};

double MillisSince(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   start)
      .count();
}

int RunBench(const BenchArgs& args, const s2d::RunConfig& config) {
  S2D_CHECK(args.width >= 1 && args.height >= 1 && args.channels >= 1 &&
                args.descriptors >= 1 && args.ransac_trials >= 1,
            s2d::ErrorCode::kInvalidArgument, "bench sizes must be positive");
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  s2d::FeatureGrid grid(args.width, args.height, args.channels);
  for (auto& v : grid.mutable_data()) v = normal(rng);
  for (std::size_t i = 0; i < grid.num_cells(); ++i) s2d::NormalizeInPlace(grid.MutableCell(i));
  std::vector<s2d::SparseDescriptor> descs(args.descriptors);
  for (int i = 0; i < args.descriptors; ++i) {
    descs[i].keypoint_index = i;
    descs[i].values.resize(args.channels);
    for (auto& v : descs[i].values) v = normal(rng);
    s2d::NormalizeInPlace(descs[i].values);
  }

  auto start = std::chrono::steady_clock::now();
  const auto single = s2d::Correlate(grid, descs.front());
  const double single_ms = MillisSince(start);

  start = std::chrono::steady_clock::now();
  const auto maps = s2d::CorrelateBatch(grid, descs);
  const double batch_ms = MillisSince(start);

  start = std::chrono::steady_clock::now();
  int accepted = 0;
  for (const auto& map : maps) {
    accepted += s2d::RatioTest(map, {config.alpha, config.fraction}).accepted ? 1 : 0;
  }
  const double ratio_ms = MillisSince(start) / static_cast<double>(maps.size());

  // PnP on a synthetic 100-point problem with 40% outliers.
  const s2d::Intrinsics k{400.0, 400.0, 256.0, 256.0};
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> pixel(0.0, 512.0);
  double pnp_ms = 0.0;
  for (int trial = 0; trial < args.ransac_trials; ++trial) {
    const s2d::Pose pose = s2d::LookAt(s2d::Vector3d(0.0, -15.0, 2.0),
                                       s2d::Vector3d(unit(rng), unit(rng), unit(rng)));
    std::vector<s2d::Correspondence2D3D> corrs;
    while (corrs.size() < 100) {
      const s2d::Landmark x(5.0 * unit(rng), 5.0 * unit(rng), 5.0 * unit(rng));
      s2d::PixelPoint px;
      if (!s2d::TryProject(pose, k, x, &px)) continue;
      const bool outlier = corrs.size() % 5 < 2;
      corrs.push_back({outlier ? s2d::PixelPoint{pixel(rng), pixel(rng)} : px, x});
    }
    s2d::RansacConfig ransac;
    ransac.inlier_threshold_px = config.inlier_threshold_px;
    ransac.max_iterations = config.max_iterations;
    ransac.confidence = config.confidence;
    ransac.min_inliers = config.min_inliers;
    ransac.seed = config.seed + trial;
    ransac.refine = config.refinement;
    start = std::chrono::steady_clock::now();
    s2d::RansacPnp(corrs, k, ransac);
    pnp_ms += MillisSince(start);
  }
  pnp_ms /= args.ransac_trials;

  std::printf("grid %dx%dx%d, %d descriptors, %d threads\n", args.width, args.height,
              args.channels, args.descriptors, s2d::NumThreads());
  std::printf("%-24s %12s\n", "stage", "ms");
  std::printf("%-24s %12.3f\n", "Correspondence Maps", single_ms);
  std::printf("%-24s %12.3f\n", "  batch, per descriptor",
              batch_ms / static_cast<double>(args.descriptors));
  std::printf("%-24s %12.3f\n", "Ratio Test", ratio_ms);
  std::printf("%-24s %12.3f\n", "PnP Solving", pnp_ms);
  std::printf("batch throughput: %.1f descriptors/s; ratio test accepted %d/%zu\n",
              1000.0 * args.descriptors / batch_ms, accepted, maps.size());
  (void)single;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-to-dense hypercolumn matching for visual localization"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = hardware parallelism)")
      ->check(CLI::NonNegativeNumber);

  auto add_threads = [&threads](CLI::App* sub) {
    sub->add_option("--threads", threads, "worker threads (0 = hardware parallelism)")
        ->check(CLI::NonNegativeNumber);
  };

  ConfigFlags synth_flags;
  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scene directory");
  synth->add_option("--out", synth_args.out, "output directory")->required();
  synth->add_option("--num-landmarks", synth_args.scene.num_landmarks);
  synth->add_option("--num-refs", synth_args.scene.num_refs);
  synth->add_option("--num-queries", synth_args.scene.num_queries);
  synth->add_option("--image-width", synth_args.scene.image.width);
  synth->add_option("--image-height", synth_args.scene.image.height);
  synth->add_option("--focal-px", synth_args.scene.focal_px);
  synth->add_option("--min-visible", synth_args.scene.min_visible);
  synth->add_option("--grid-stride", synth_args.tensors.grid_stride);
  synth->add_option("--channels", synth_args.tensors.channels);
  synth->add_option("--noise-sigma", synth_args.tensors.noise.descriptor_noise_sigma);
  synth->add_option("--outlier-fraction", synth_args.tensors.noise.outlier_fraction);
  synth->add_option("--background", synth_args.background)
      ->check(CLI::IsMember({"random", "orthogonal"}));
  AddConfigFlags(synth, synth_flags);
  add_threads(synth);

  ConfigFlags db_flags;
  std::string db_input;
  std::string db_out;
  CLI::App* build_db = app.add_subcommand("build-db", "fit PCA and write the reference database");
  build_db->add_option("--input", db_input, "reference manifest written by synth")->required();
  build_db->add_option("--out", db_out, "database directory")->required();
  AddConfigFlags(build_db, db_flags);
  add_threads(build_db);

  ConfigFlags loc_flags;
  std::string loc_db;
  std::string loc_queries;
  std::string loc_out;
  CLI::App* localize = app.add_subcommand("localize", "localize a list of queries");
  localize->add_option("--db", loc_db, "database directory")->required();
  localize->add_option("--queries", loc_queries, "query list file")->required();
  localize->add_option("--out", loc_out, "results CSV path")->required();
  AddConfigFlags(localize, loc_flags);
  add_threads(localize);

  std::string eval_results;
  std::string eval_gt;
  std::string eval_json;
  CLI::App* evaluate = app.add_subcommand("evaluate", "recall at the standard thresholds");
  evaluate->add_option("--results", eval_results, "results CSV")->required();
  evaluate->add_option("--gt", eval_gt, "ground-truth pose file")->required();
  evaluate->add_option("--json", eval_json, "also write the report as JSON");

  ConfigFlags bench_flags;
  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "time the matching and PnP stages");
  bench->add_option("--width", bench_args.width);
  bench->add_option("--height", bench_args.height);
  bench->add_option("--channels", bench_args.channels);
  bench->add_option("--descriptors", bench_args.descriptors);
  bench->add_option("--ransac-trials", bench_args.ransac_trials);
  AddConfigFlags(bench, bench_flags);
  add_threads(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    s2d::SetNumThreads(threads);
    if (*synth) return RunSynth(synth_args, ResolveConfig(synth_flags));
    if (*build_db) return RunBuildDb(db_input, db_out, ResolveConfig(db_flags));
    if (*localize) {
      return RunLocalize(loc_db, loc_queries, loc_out, ResolveConfig(loc_flags));
    }
    if (*evaluate) return RunEvaluate(eval_results, eval_gt, eval_json);
    if (*bench) return RunBench(bench_args, ResolveConfig(bench_flags));
  } catch (const s2d::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == s2d::ErrorCode::kInvalidArgument ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
