#include "dspi/schedule.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dspi {

namespace {
void check_beta(double beta, int k) {
    if (!std::isfinite(beta) || beta <= 0.0 || beta > 1.0) {
        std::ostringstream msg;
        msg << "schedule: beta_" << k << " = " << beta << " outside (0,1]";
        throw std::invalid_argument(msg.str());
    }
}
}  // namespace

StepsizeSchedule StepsizeSchedule::constant_after_one(double beta) {
    check_beta(beta, 1);
    StepsizeSchedule s;
    s.kind_ = ScheduleKind::ConstantAfterOne;
    s.constant_ = beta;
    return s;
}

StepsizeSchedule StepsizeSchedule::harmonic() {
    StepsizeSchedule s;
    s.kind_ = ScheduleKind::Harmonic;
    return s;
}

StepsizeSchedule StepsizeSchedule::custom(std::vector<double> betas) {
    for (std::size_t k = 0; k < betas.size(); ++k) check_beta(betas[k], static_cast<int>(k));
    StepsizeSchedule s;
    s.kind_ = ScheduleKind::Custom;
    s.values_ = std::move(betas);
    return s;
}

double StepsizeSchedule::beta(int k) const {
    if (k < 0) throw std::invalid_argument("schedule: negative iteration index");
    double value = 0.0;
    switch (kind_) {
        case ScheduleKind::ConstantAfterOne:
            value = (k == 0) ? 1.0 : constant_;
            break;
        case ScheduleKind::Harmonic:
            value = 1.0 / (k + 1);
            break;
        case ScheduleKind::Custom:
            if (static_cast<std::size_t>(k) >= values_.size())
                throw std::invalid_argument("schedule: custom list exhausted");
            value = values_[k];
            break;
    }
    check_beta(value, k);
    return value;
}

std::vector<double> beta_from_alpha(const std::vector<double>& alphas) {
    std::vector<double> betas;
    betas.reserve(alphas.size());
    double running = 0.0;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        if (!(alphas[k] > 0.0) || !std::isfinite(alphas[k]))
            throw std::invalid_argument("beta_from_alpha: stepsizes must be finite and positive");
        running += alphas[k];
        betas.push_back(alphas[k] / running);
    }
    if (!betas.empty()) betas[0] = 1.0;
    return betas;
}

std::vector<double> alpha_from_beta(const std::vector<double>& betas, double alpha0) {
    if (!(alpha0 > 0.0)) throw std::invalid_argument("alpha_from_beta: alpha0 must be positive");
    if (betas.empty()) return {};
    if (betas[0] != 1.0) throw std::invalid_argument("alpha_from_beta: beta_0 must equal 1");
    std::vector<double> alphas;
    alphas.reserve(betas.size());
    alphas.push_back(alpha0);
    double running = alpha0;
    for (std::size_t k = 1; k < betas.size(); ++k) {
        double b = betas[k];
        if (!(b > 0.0) || b >= 1.0)
            throw std::invalid_argument("alpha_from_beta: beta_k must lie in (0,1) for k >= 1");
        double a = b * running / (1.0 - b);
        alphas.push_back(a);
        running += a;
    }
    return alphas;
}

}  // namespace dspi
