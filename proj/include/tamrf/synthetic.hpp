#pragma once

#include "tamrf/schema.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace tamrf {

/// Two-mode (adopter / non-adopter) survey generator. Each respondent draws a
/// mode, a shared latent attitude g ~ N(0, 1) and per-factor residuals e_f;
/// factor score z_f = mean_f[mode] + latent_sd * (rho * g + sqrt(1 - rho^2) * e_f).
/// Items are z_f plus N(0, noise_sd) noise, clamped and snapped to the
/// -100..100 step-25 grid. All defaults are ours, not estimates.
struct SyntheticSpec {
  std::size_t n = 284;
  double adopter_fraction = 0.87;
  /// Factor code -> mean on the response scale per mode. Factors not listed
  /// get 0.
  std::map<std::string, double> adopter_means{{"PR", 30}, {"T", 35}, {"PU", 45}, {"PEOU", 35}, {"A", 55}, {"BI", 75}};
  std::map<std::string, double> non_adopter_means{
      {"PR", -35}, {"T", -30}, {"PU", -20}, {"PEOU", -10}, {"A", -45}, {"BI", -60}};
  double latent_sd = 25.0;
  double latent_correlation = 0.8;
  double noise_sd = 12.0;
  /// Per response cell; the cohort flag is never missing.
  double missing_rate = 0.0045;
  /// Probability of the PsychOwnership cohort.
  double cohort_split = 0.5;
  /// false: every item i.i.d. uniform over the 9 grid points (no signal).
  bool signal = true;

  void validate() const;
};

/// Generates `spec.n` respondents. Respondent i uses RNG stream (seed, i).
/// Declared auxiliary columns named car_share, pt_share and active_share are
/// filled with travel-time percentages (car roughly 100 minus the others);
/// other auxiliary columns are left missing.
Dataset generate_synthetic(const SyntheticSpec& spec, const ConstructSchema& schema, std::uint64_t seed);

}  // namespace tamrf
