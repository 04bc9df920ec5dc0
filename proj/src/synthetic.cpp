#include "tamrf/synthetic.hpp"

#include "tamrf/error.hpp"
#include "tamrf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace tamrf {

namespace {

double snap(double v) { return std::clamp(std::round(v / 25.0) * 25.0, -100.0, 100.0); }

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void SyntheticSpec::validate() const {
  if (n < 1) throw ConfigError("synthetic: n must be >= 1");
  if (!in_unit(adopter_fraction)) throw ConfigError("synthetic: adopter_fraction outside [0, 1]");
  if (!in_unit(missing_rate)) throw ConfigError("synthetic: missing_rate outside [0, 1]");
  if (!in_unit(cohort_split)) throw ConfigError("synthetic: cohort_split outside [0, 1]");
  if (!in_unit(latent_correlation)) throw ConfigError("synthetic: latent_correlation outside [0, 1]");
  if (!(latent_sd >= 0.0) || !(noise_sd >= 0.0)) throw ConfigError("synthetic: standard deviations must be >= 0");
}

Dataset generate_synthetic(const SyntheticSpec& spec, const ConstructSchema& schema, std::uint64_t seed) {
  spec.validate();
  std::vector<std::string> columns = schema.item_columns();
  for (const auto& aux : schema.auxiliary_columns()) columns.push_back(aux);
  const auto col = [&](std::string_view code) {
    return static_cast<Eigen::Index>(std::find(columns.begin(), columns.end(), code) - columns.begin());
  };
  const auto n_cols = static_cast<Eigen::Index>(columns.size());
  const auto n = static_cast<Eigen::Index>(spec.n);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double rho = spec.latent_correlation;
  const double resid = std::sqrt(1.0 - rho * rho);

  Eigen::MatrixXd values = Eigen::MatrixXd::Constant(n, n_cols, nan);
  std::vector<std::string> ids;
  std::vector<std::optional<Cohort>> cohort(spec.n);
  const auto mean_of = [](const std::map<std::string, double>& m, const std::string& code) {
    const auto it = m.find(code);
    return it == m.end() ? 0.0 : it->second;
  };

  for (Eigen::Index i = 0; i < n; ++i) {
    auto rng = make_rng(seed, {0x5e7, static_cast<std::uint64_t>(i)});
    ids.push_back(fmt::format("s{:04d}", i + 1));
    const bool adopter = uniform_unit(rng) < spec.adopter_fraction;
    const bool owned = uniform_unit(rng) < spec.cohort_split;
    const double g = standard_normal(rng);

    for (const auto& f : schema.factors()) {
      if (f.overall_item == schema.cohort_column()) {
        values(i, col(f.overall_item)) = owned ? 1.0 : 0.0;
        continue;
      }
      const double z = mean_of(adopter ? spec.adopter_means : spec.non_adopter_means, f.code) +
                       spec.latent_sd * (rho * g + resid * standard_normal(rng));
      auto emit = [&](const std::string& item) {
        const double v = spec.signal ? snap(z + spec.noise_sd * standard_normal(rng))
                                     : -100.0 + 25.0 * static_cast<double>(uniform_index(rng, 9));
        values(i, col(item)) = v;
      };
      for (const auto& item : f.item_codes) emit(item);
      emit(f.overall_item);
    }
    cohort[static_cast<std::size_t>(i)] = owned ? Cohort::PsychOwnership : Cohort::Control;

    // Travel-time shares; car takes what public transport, active travel and
    // other modes leave.
    const double pt = std::round(50.0 * uniform_unit(rng));
    const double active = std::round(40.0 * uniform_unit(rng));
    const double other = std::round(20.0 * uniform_unit(rng));
    const double car = std::max(0.0, 100.0 - pt - active - other);
    for (const auto& [name, v] : {std::pair{"car_share", car}, {"pt_share", pt}, {"active_share", active}})
      if (const auto c = col(name); c < n_cols) values(i, c) = v;

    if (spec.missing_rate > 0.0)
      for (const auto& code : schema.response_columns())
        if (uniform_unit(rng) < spec.missing_rate) values(i, col(code)) = nan;
  }
  return Dataset(std::move(columns), std::move(ids), std::move(values), std::move(cohort));
}

}  // namespace tamrf
