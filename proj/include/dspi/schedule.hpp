#pragma once

#include <vector>

namespace dspi {

enum class ScheduleKind { ConstantAfterOne, Harmonic, Custom };

/**
 * Stepsize sequence beta_k in (0,1].
 *
 *   ConstantAfterOne(beta)  beta_0 = 1, then beta_k = beta
 *   Harmonic                beta_k = 1/(k+1), non-summable
 *   Custom(list)            explicit values; querying past the end is an error
 */
class StepsizeSchedule {
  public:
    static StepsizeSchedule constant_after_one(double beta);
    static StepsizeSchedule harmonic();
    static StepsizeSchedule custom(std::vector<double> betas);

    /** beta_k; throws std::invalid_argument on values outside (0,1]. */
    double beta(int k) const;

    ScheduleKind kind() const { return kind_; }
    /** The constant used after the first step (ConstantAfterOne only). */
    double constant() const { return constant_; }

  private:
    StepsizeSchedule() = default;
    ScheduleKind kind_ = ScheduleKind::ConstantAfterOne;
    double constant_ = 1.0;
    std::vector<double> values_;
};

/** beta_k = alpha_k / sum_{i<=k} alpha_i; beta_0 = 1 always. */
std::vector<double> beta_from_alpha(const std::vector<double>& alphas);

/**
 * Inverse map: alpha_0 given, alpha_k = beta_k * (sum_{i<k} alpha_i) / (1 - beta_k).
 * Requires beta_0 = 1 and beta_k in (0,1) for k >= 1.
 */
std::vector<double> alpha_from_beta(const std::vector<double>& betas, double alpha0);

}  // namespace dspi
