#include "s2d/config.h"

#include <charconv>
#include <sstream>

#include "s2d/error.h"
#include "s2d/io.h"

namespace s2d {
namespace {

std::string Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  S2D_CHECK(ec == std::errc() && ptr == value.data() + value.size(), ErrorCode::kParse,
            "config key '" + key + "': bad value '" + value + "'");
  return out;
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw Error(ErrorCode::kParse, "config key '" + key + "': bad boolean '" + value + "'");
}

}  // namespace

void RunConfig::Validate() const {
  S2D_CHECK(n_neighbors >= 1, ErrorCode::kInvalidArgument, "n_neighbors must be >= 1");
  S2D_CHECK(alpha > 0.0, ErrorCode::kInvalidArgument, "alpha must be > 0");
  S2D_CHECK(fraction >= 0.0 && fraction <= 1.0, ErrorCode::kInvalidArgument,
            "fraction must lie in [0, 1]");
  S2D_CHECK(inlier_threshold_px > 0.0, ErrorCode::kInvalidArgument,
            "inlier_threshold_px must be > 0");
  S2D_CHECK(min_inliers >= 4, ErrorCode::kInvalidArgument, "min_inliers must be >= 4");
  S2D_CHECK(confidence > 0.0 && confidence < 1.0, ErrorCode::kInvalidArgument,
            "confidence must lie in (0, 1)");
  S2D_CHECK(max_iterations >= 1, ErrorCode::kInvalidArgument,
            "max_iterations must be >= 1");
  S2D_CHECK(pca_dim >= 1, ErrorCode::kInvalidArgument, "pca_dim must be >= 1");
  S2D_CHECK(local_pca_dim >= 0, ErrorCode::kInvalidArgument,
            "local_pca_dim must be >= 0");
}

LocalizeOptions RunConfig::ToLocalizeOptions() const {
  Validate();
  LocalizeOptions opts;
  opts.n_neighbors = static_cast<std::size_t>(n_neighbors);
  opts.match.alpha = alpha;
  opts.match.fraction = fraction;
  opts.ransac.inlier_threshold_px = inlier_threshold_px;
  opts.ransac.min_inliers = min_inliers;
  opts.ransac.confidence = confidence;
  opts.ransac.max_iterations = max_iterations;
  opts.ransac.seed = seed;
  opts.ransac.refine = refinement;
  return opts;
}

void ApplyRunConfigText(std::string_view text, RunConfig& c) {
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (Trim(line).empty()) continue;
    const auto eq = line.find('=');
    S2D_CHECK(eq != std::string::npos, ErrorCode::kParse,
              "config line without '=': '" + Trim(line) + "'");
    const std::string key = Trim(std::string_view(line).substr(0, eq));
    const std::string value = Trim(std::string_view(line).substr(eq + 1));
    if (key == "n_neighbors") c.n_neighbors = ParseNumber<int>(key, value);
    else if (key == "alpha") c.alpha = ParseNumber<double>(key, value);
    else if (key == "fraction") c.fraction = ParseNumber<double>(key, value);
    else if (key == "inlier_threshold_px") c.inlier_threshold_px = ParseNumber<double>(key, value);
    else if (key == "min_inliers") c.min_inliers = ParseNumber<int>(key, value);
    else if (key == "confidence") c.confidence = ParseNumber<double>(key, value);
    else if (key == "max_iterations") c.max_iterations = ParseNumber<int>(key, value);
    else if (key == "seed") c.seed = ParseNumber<std::uint64_t>(key, value);
    else if (key == "refinement") c.refinement = ParseBool(key, value);
    else if (key == "pca_dim") c.pca_dim = ParseNumber<int>(key, value);
    else if (key == "local_pca_dim") c.local_pca_dim = ParseNumber<int>(key, value);
    else if (key == "fallback_retrieval_pose") c.fallback_retrieval_pose = ParseBool(key, value);
    else throw Error(ErrorCode::kParse, "unknown config key '" + key + "'");
  }
}

RunConfig ParseRunConfig(std::string_view text) {
  RunConfig c;
  ApplyRunConfigText(text, c);
  return c;
}

std::string FormatRunConfig(const RunConfig& c) {
  std::ostringstream out;
  out << "n_neighbors = " << c.n_neighbors << "\n"
      << "alpha = " << io::FormatDouble(c.alpha) << "\n"
      << "fraction = " << io::FormatDouble(c.fraction) << "\n"
      << "inlier_threshold_px = " << io::FormatDouble(c.inlier_threshold_px) << "\n"
      << "min_inliers = " << c.min_inliers << "\n"
      << "confidence = " << io::FormatDouble(c.confidence) << "\n"
      << "max_iterations = " << c.max_iterations << "\n"
      << "seed = " << c.seed << "\n"
      << "refinement = " << (c.refinement ? "true" : "false") << "\n"
      << "pca_dim = " << c.pca_dim << "\n"
      << "local_pca_dim = " << c.local_pca_dim << "\n"
      << "fallback_retrieval_pose = " << (c.fallback_retrieval_pose ? "true" : "false")
      << "\n";
  return out.str();
}

}  // namespace s2d
