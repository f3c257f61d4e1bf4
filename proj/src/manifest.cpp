#include "xcond/manifest.hpp"

#include "xcond/error.hpp"
#include "xcond/matrix_io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace xcond {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
T field(const json& entry, const char* key, const std::string& where) {
  if (!entry.contains(key)) throw DataError(where + ": missing field '" + key + "'");
  try {
    return entry.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

Dataset load_dataset(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError(manifest_path.string() + ": cannot open manifest");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": malformed manifest: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
    throw DataError(manifest_path.string() + ": manifest needs an 'entries' list");
  }
  const fs::path base = manifest_path.parent_path();
  std::vector<double> centers;
  if (doc.contains("freq_centers_hz")) {
    centers = field<std::vector<double>>(doc, "freq_centers_hz", manifest_path.string());
  }

  std::vector<TrialPair> pairs;
  std::size_t index = 0;
  for (const auto& e : doc["entries"]) {
    const std::string where = manifest_path.string() + " entry " + std::to_string(index++);
    TrialPair p;
    p.trial.sentence_id = field<int>(e, "sentence_id", where);
    p.trial.repetition = field<int>(e, "repetition", where);
    p.trial.condition = parse_condition(field<std::string>(e, "condition", where));
    p.trial.sample_rate_hz = field<double>(e, "sample_rate_hz", where);
    fs::path trial = field<std::string>(e, "trial", where);
    fs::path spec = field<std::string>(e, "spectrogram", where);
    if (trial.is_relative()) trial = base / trial;
    if (spec.is_relative()) spec = base / spec;
    if (!fs::exists(trial)) throw DataError(where + ": missing trial file " + trial.string());
    if (!fs::exists(spec)) throw DataError(where + ": missing spectrogram file " + spec.string());
    p.trial_path = trial.string();
    p.target_path = spec.string();
    p.trial.data = read_matrix(trial);
    p.target.data = read_matrix(spec);
    p.target.sample_rate_hz = p.trial.sample_rate_hz;
    if (centers.empty()) {
      for (Eigen::Index f = 0; f < p.target.data.rows(); ++f) p.target.freq_centers_hz.push_back(f + 1.0);
    } else {
      p.target.freq_centers_hz = centers;
    }
    pairs.push_back(std::move(p));
  }
  return Dataset(std::move(pairs));
}

fs::path write_dataset(const Dataset& dataset, const fs::path& dir, const std::string& extension) {
  if (extension != ".f64" && extension != ".csv") throw ConfigError("matrix extension must be .f64 or .csv");
  std::error_code ec;
  fs::create_directories(dir / "trials", ec);
  fs::create_directories(dir / "spectrograms", ec);
  if (ec) throw DataError(dir.string() + ": cannot create directories: " + ec.message());

  json doc;
  if (!dataset.empty()) doc["freq_centers_hz"] = dataset.pairs().front().target.freq_centers_hz;
  json entries = json::array();
  for (const auto& p : dataset.pairs()) {
    std::ostringstream stem;
    stem << "s" << p.trial.sentence_id << "_r" << p.trial.repetition << "_" << to_string(p.trial.condition);
    const fs::path trial = fs::path("trials") / (stem.str() + extension);
    const fs::path spec = fs::path("spectrograms") / (stem.str() + extension);
    write_matrix(dir / trial, p.trial.data);
    write_matrix(dir / spec, p.target.data);
    entries.push_back({{"sentence_id", p.trial.sentence_id},
                       {"repetition", p.trial.repetition},
                       {"condition", std::string(to_string(p.trial.condition))},
                       {"trial", trial.generic_string()},
                       {"spectrogram", spec.generic_string()},
                       {"sample_rate_hz", p.trial.sample_rate_hz}});
  }
  doc["entries"] = entries;
  const fs::path manifest = dir / "manifest.json";
  std::ofstream out(manifest);
  if (!out) throw DataError(manifest.string() + ": cannot open for writing");
  out << doc.dump(2) << '\n';
  return manifest;
}

}  // namespace xcond
