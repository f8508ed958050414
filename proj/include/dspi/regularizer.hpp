#pragma once

#include <Eigen/Dense>

#include <string>

namespace dspi {

enum class RegularizerKind { Zero, ShannonEntropy, ShiftedNegSquaredNorm };

/**
 * Concave smoothing term nu on the action simplex, together with its maximum,
 * its maximizer, and the regularized greedy step
 *
 *     argmax_{mu in simplex} { mu.q + eta * nu(mu) }
 *
 * in closed form. Supported kinds:
 *   Zero                  nu = 0
 *   ShannonEntropy        nu(mu) = -sum_a mu(a) log mu(a)
 *   ShiftedNegSquaredNorm nu(mu) = (1 - |mu|^2) / 2
 *
 * All kinds are nonnegative on the simplex and maximized at the uniform
 * distribution (for Zero the uniform maximizer is a convention; every point
 * attains the maximum).
 */
class Regularizer {
  public:
    explicit Regularizer(RegularizerKind kind) : kind_(kind) {}

    /** Config keys: "zero" | "entropy" | "neg_sq_norm". */
    static Regularizer from_key(const std::string& key);

    RegularizerKind kind() const { return kind_; }
    std::string key() const;

    /** nu(mu); throws std::invalid_argument when mu is not a distribution. */
    double value(const Eigen::VectorXd& mu) const;

    /** max_{mu in simplex} nu(mu): 0, log(m), (1 - 1/m)/2 respectively. */
    double max_value(int m) const;

    /** A designated maximizer of nu (uniform for all kinds). */
    Eigen::VectorXd max_point(int m) const;

    /**
     * argmax_{mu} { mu.q + eta nu(mu) }.
     *
     * Zero kind or eta = 0: deterministic greedy point mass, ties broken by
     * the lowest action index. Entropy: softmax(q/eta) computed with
     * max-subtraction. ShiftedNegSquaredNorm: Euclidean projection of q/eta
     * onto the simplex.
     */
    Eigen::VectorXd argmax(const Eigen::VectorXd& q, double eta) const;

  private:
    RegularizerKind kind_;
};

/** Point mass on argmax_a q(a); ties go to the lowest index. */
Eigen::VectorXd greedy_point_mass(const Eigen::VectorXd& q);

/** Exact sort-based Euclidean projection onto the probability simplex. */
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

}  // namespace dspi
