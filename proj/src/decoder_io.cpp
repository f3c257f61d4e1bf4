#include "xcond/decoder_io.hpp"

#include "xcond/error.hpp"
#include "xcond/matrix_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace xcond {

void save_decoder(const std::filesystem::path& path, const LinearDecoder& decoder) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  Eigen::MatrixXd lags(1, decoder.lagspec.size());
  for (Eigen::Index i = 0; i < lags.cols(); ++i) lags(0, i) = decoder.lagspec.lags()[i];
  Eigen::MatrixXd meta(1, 2);
  meta << decoder.alpha, static_cast<double>(index_of(decoder.trained_on));
  Eigen::VectorXd intercept =
      decoder.intercept.size() == decoder.freqs() ? decoder.intercept : Eigen::VectorXd::Zero(decoder.freqs());
  write_f64_block(out, lags);
  write_f64_block(out, meta);
  write_f64_block(out, decoder.G);
  write_f64_block(out, intercept.transpose());
  if (!out) throw DataError(path.string() + ": write failed");

  nlohmann::json side = {{"format", "xcond-linear-decoder"},
                         {"channels", decoder.channels()},
                         {"lags", decoder.lagspec.lags()},
                         {"frequencies", decoder.freqs()},
                         {"g_shape", {decoder.G.rows(), decoder.G.cols()}},
                         {"alpha", decoder.alpha},
                         {"trained_on", std::string(to_string(decoder.trained_on))}};
  std::ofstream sidecar(path.string() + ".json");
  if (!sidecar) throw DataError(path.string() + ".json: cannot open for writing");
  sidecar << side.dump(2) << '\n';
}

LinearDecoder load_decoder(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  const std::string name = path.string();
  const Eigen::MatrixXd lags = read_f64_block(in, name + " (lags)");
  const Eigen::MatrixXd meta = read_f64_block(in, name + " (meta)");
  LinearDecoder d;
  d.G = read_f64_block(in, name + " (G)");
  const Eigen::MatrixXd intercept = read_f64_block(in, name + " (intercept)");
  if (lags.rows() != 1 || meta.size() != 2 || intercept.size() != d.G.cols()) {
    throw DataError(name + ": malformed decoder blocks");
  }
  std::vector<int> l;
  for (Eigen::Index i = 0; i < lags.cols(); ++i) l.push_back(static_cast<int>(std::lround(lags(0, i))));
  d.lagspec = LagSpec(std::move(l));
  if (d.G.rows() % d.lagspec.size() != 0) throw DataError(name + ": G rows are not a multiple of the lag count");
  d.alpha = meta(0, 0);
  const auto cond = std::lround(meta(0, 1));
  if (cond < 0 || cond > 2) throw DataError(name + ": bad condition tag");
  d.trained_on = kConditions[static_cast<std::size_t>(cond)];
  d.intercept = intercept.reshaped();
  require_finite(d.G, name);
  return d;
}

}  // namespace xcond
