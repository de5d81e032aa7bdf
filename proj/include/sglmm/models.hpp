#pragma once

// Model layer: response families, spatial supports, hyperpriors, and the
// conditional building blocks (conjugate Gaussian parameters, LMA auxiliary
// updates, penalty diagnostics) that the sampler assembles into sweeps.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sglmm/distributions.hpp"
#include "sglmm/errors.hpp"
#include "sglmm/fem.hpp"
#include "sglmm/graph.hpp"
#include "sglmm/mcmc.hpp"
#include "sglmm/rng.hpp"
#include "sglmm/sparse.hpp"

namespace sglmm {

using Matrix = Eigen::MatrixXd;

enum class Family { gaussian, binary_probit, poisson };

inline std::string family_name(Family f) {
    switch (f) {
        case Family::gaussian: return "gaussian";
        case Family::binary_probit: return "binary_probit";
        case Family::poisson: return "poisson";
    }
    return "unknown";
}

enum class SigmaPriorKind { half_normal, inverse_gamma };

// Half-normal hyperprior log-kernel in the sampled parametrization. With
// on_sd set, the half-normal sits on the square root of the sampled value
// (kernel -theta/(2 s^2), e.g. a scale-s prior on sigma while sampling
// sigma^2); otherwise it sits on the sampled value itself (-theta^2/(2 s^2)).
struct HyperPrior {
    double scale = 1.0;
    bool on_sd = false;

    double log_term(double value) const {
        if (!(scale > 0.0)) throw InvalidParams("hyperprior: scale must be positive");
        if (!(value >= 0.0)) throw InvalidParams("hyperprior: value must be non-negative");
        return on_sd ? -value / (2.0 * scale * scale)
                     : -value * value / (2.0 * scale * scale);
    }
};

struct InverseGammaPrior {
    double shape = 1.0;
    double scale = 1.0;
};

// Everything about an SGLMM except the spatial support itself: response
// family, prior kind, design width, and the hyperprior configuration. The
// scale parameter is xi^2 under the GRF prior and lambda^2 under the LMA
// prior; tau only exists for the continuous-support LMA. Optionals pin a
// hyperparameter to a fixed value, in which case its update is skipped.
struct ModelSpec {
    Family family = Family::gaussian;
    PriorKind prior = PriorKind::grf;
    int covariates = 1;           // design-matrix columns, intercept included
    bool has_offset = false;      // Poisson exposure offsets
    bool include_nugget = false;  // per-observation noise inside the Poisson link
    double beta_variance = 1000.0;

    HyperPrior scale_prior{10.0, false};  // xi^2 (GRF) or lambda^2 (LMA)
    HyperPrior kappa2_prior{1.0, false};
    HyperPrior tau_prior{1.0, false};  // continuous-LMA shape parameter
    SigmaPriorKind sigma2_prior = SigmaPriorKind::half_normal;
    HyperPrior sigma2_half_normal{1.0, true};
    InverseGammaPrior sigma2_inverse_gamma{1.0, 1.0};

    // Continuous-LMA auxiliary route: one-at-a-time MH by default, exact GIG
    // Gibbs behind this switch (the Gibbs draws mix poorly when the shape
    // parameter is small, so MH is the default).
    bool gamma_update_gibbs = false;
    // Pair proposals for (kappa^2, xi^2) / (tau, lambda^2). Defaults to joint
    // on continuous supports and scalar on discrete supports when unset.
    std::optional<bool> joint_hyper_proposals;

    std::optional<double> fixed_scale;  // pins xi^2 / lambda^2
    std::optional<double> fixed_kappa2;
    std::optional<double> fixed_sigma2;
    std::optional<double> fixed_tau;
};

// kappa^2-dependent pieces of the field prior, rebuilt whenever kappa^2
// moves. half_logdet is the kappa^2-varying part of (1/2) log|prior
// precision|: (alpha/2) log|kappa^2 C + G| on continuous supports and
// ((k+1)/2) log|kappa^2 I + Laplacian| on discrete ones, identical for both
// prior kinds because the auxiliary-variance determinant does not involve
// kappa^2.
struct FieldStructure {
    double kappa2 = 1.0;
    SparseMatrix prior_q;      // GRF: unit-scale precision (divide by xi^2)
    SparseMatrix delta;        // LMA: K_alpha (continuous) / Delta^(k) (discrete)
    double half_logdet = 0.0;
};

// Triangulated-domain support: lumped mass and stiffness matrices are
// assembled once; structure() evaluates the kappa^2-dependent operators.
class ContinuousSupport {
  public:
    ContinuousSupport(Mesh mesh, int alpha)
        : mesh_(std::move(mesh)),
          alpha_(alpha),
          c_(assemble_mass_lumped(mesh_)),
          g_(assemble_stiffness(mesh_)),
          c_diag_(c_.diagonal()) {
        SpdeOrder{alpha_, PriorKind::grf}.validate();
    }

    int field_size() const { return static_cast<int>(mesh_.nodes.size()); }
    int alpha() const { return alpha_; }
    const Mesh& mesh() const { return mesh_; }
    const Vector& mass_diagonal() const { return c_diag_; }  // C_ii (LMA shapes)

    SparseMatrix projection(const std::vector<std::array<double, 2>>& locations) const {
        return assemble_projection(mesh_, locations);
    }

    FieldStructure structure(PriorKind kind, double kappa2) const {
        if (!(kappa2 > 0.0)) throw NonPositiveKappa("support: kappa^2 must be positive");
        SpdeOrder{alpha_, kind}.validate();
        const double kappa = std::sqrt(kappa2);
        FieldStructure s;
        s.kappa2 = kappa2;
        const auto whittle = factorize(grf_precision(c_, g_, kappa, 1));
        if (!whittle)
            throw NotPositiveDefiniteError(
                "support: kappa^2 C + G failed to factorize at kappa^2 = " +
                std::to_string(kappa2));
        s.half_logdet = 0.5 * alpha_ * whittle->log_det();
        if (kind == PriorKind::grf)
            s.prior_q = grf_precision(c_, g_, kappa, alpha_);
        else
            s.delta = lma_operator(c_, g_, kappa, alpha_);
        return s;
    }

  private:
    Mesh mesh_;
    int alpha_;
    SparseMatrix c_;
    SparseMatrix g_;
    Vector c_diag_;
};

// Graph support for areal data: the order-k difference operator built from
// kappa^2 I + Laplacian.
class DiscreteSupport {
  public:
    DiscreteSupport(GraphSupport graph, int k)
        : graph_(std::move(graph)), k_(k), laplacian_(graph_laplacian(graph_)) {
        if (k_ < 0) throw InvalidParams("support: difference order k must be non-negative");
    }

    int field_size() const { return graph_.n; }
    int order() const { return k_; }
    const GraphSupport& graph() const { return graph_; }
    Vector mass_diagonal() const { return Vector::Ones(graph_.n); }

    FieldStructure structure(PriorKind kind, double kappa2) const {
        if (!(kappa2 > 0.0)) throw NonPositiveKappa("support: kappa^2 must be positive");
        const DifferenceOperator op = difference_operator(laplacian_, kappa2, k_);
        EigenSparse m(graph_.n, graph_.n);
        m.setIdentity();
        m = kappa2 * m + laplacian_.eigen();
        const auto factor = factorize(symmetrized(m));
        if (!factor)
            throw NotPositiveDefiniteError(
                "support: kappa^2 I + Laplacian failed to factorize at kappa^2 = " +
                std::to_string(kappa2));
        FieldStructure s;
        s.kappa2 = kappa2;
        s.half_logdet = 0.5 * (k_ + 1) * factor->log_det();
        if (kind == PriorKind::grf)
            s.prior_q = op.precision();
        else
            s.delta = op.delta;
        return s;
    }

  private:
    GraphSupport graph_;
    int k_;
    SparseMatrix laplacian_;
};

using Support = std::variant<ContinuousSupport, DiscreteSupport>;

inline int support_field_size(const Support& support) {
    return std::visit([](const auto& s) { return s.field_size(); }, support);
}

inline Vector support_mass_diagonal(const Support& support) {
    return std::visit([](const auto& s) { return Vector(s.mass_diagonal()); }, support);
}

inline FieldStructure support_structure(const Support& support, PriorKind kind, double kappa2) {
    return std::visit([&](const auto& s) { return s.structure(kind, kappa2); }, support);
}

inline bool support_is_continuous(const Support& support) {
    return std::holds_alternative<ContinuousSupport>(support);
}

// Selection matrix with one unit entry per row: row r picks out column
// index[r]. Covers both discrete node incidence (observation r sits at graph
// node index[r]) and the village-replication matrix B (observation r belongs
// to group index[r]).
inline SparseMatrix replication_matrix(const std::vector<int>& index, int n_cols) {
    if (n_cols < 1) throw InvalidParams("replication matrix: need at least one column");
    std::vector<Triplet> triplets;
    triplets.reserve(index.size());
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (index[r] < 0 || index[r] >= n_cols)
            throw DimensionMismatch("replication matrix: index " + std::to_string(index[r]) +
                                    " out of range at row " + std::to_string(r));
        triplets.emplace_back(static_cast<int>(r), index[r], 1.0);
    }
    return SparseMatrix::from_triplets(static_cast<int>(index.size()), n_cols, triplets, false);
}

// Observed data plus the observation-to-field map. `active` lists the rows
// whose likelihood enters the fit (ascending, no duplicates); an empty list
// means every row. Held-out rows keep their design and projection entries so
// per-state predictive densities can be evaluated for cross-validation.
struct ModelData {
    Vector y;
    Matrix x;
    SparseMatrix obs;   // n_obs x field_size projection / selection
    Vector log_offset;  // size n_obs when the model has offsets, else empty
    std::vector<int> active;
};

inline std::vector<int> resolve_active(const ModelData& data) {
    if (!data.active.empty()) return data.active;
    std::vector<int> all(static_cast<std::size_t>(data.y.size()));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return all;
}

inline void validate_model(const ModelSpec& spec, const ModelData& data, int field_size) {
    std::vector<std::string> errs;
    const Eigen::Index n = data.y.size();
    if (n < 1) errs.push_back("data: need at least one observation");
    if (spec.covariates < 1) errs.push_back("spec: covariate count must be >= 1");
    if (data.x.rows() != n)
        errs.push_back("data: design matrix has " + std::to_string(data.x.rows()) +
                       " rows for " + std::to_string(n) + " responses");
    if (data.x.cols() != spec.covariates)
        errs.push_back("data: design matrix has " + std::to_string(data.x.cols()) +
                       " columns but the spec declares " + std::to_string(spec.covariates));
    if (data.obs.rows() != n)
        errs.push_back("data: observation map has " + std::to_string(data.obs.rows()) +
                       " rows for " + std::to_string(n) + " responses");
    if (data.obs.cols() != field_size)
        errs.push_back("data: observation map has " + std::to_string(data.obs.cols()) +
                       " columns for a field of size " + std::to_string(field_size));
    if (!data.y.allFinite()) errs.push_back("data: responses must be finite");
    if (!data.x.allFinite()) errs.push_back("data: covariates must be finite");

    if (spec.family == Family::binary_probit) {
        for (Eigen::Index i = 0; i < n; ++i)
            if (data.y[i] != 0.0 && data.y[i] != 1.0) {
                errs.push_back("data: binary_probit responses must be 0 or 1 (row " +
                               std::to_string(i) + " is " + std::to_string(data.y[i]) + ")");
                break;
            }
    }
    if (spec.family == Family::poisson) {
        for (Eigen::Index i = 0; i < n; ++i)
            if (data.y[i] < 0.0 || data.y[i] != std::floor(data.y[i])) {
                errs.push_back("data: poisson responses must be non-negative integers (row " +
                               std::to_string(i) + " is " + std::to_string(data.y[i]) + ")");
                break;
            }
    }

    if (spec.has_offset && spec.family != Family::poisson)
        errs.push_back("spec: offsets are only supported by the poisson family");
    if (spec.has_offset) {
        if (data.log_offset.size() != n)
            errs.push_back("data: log offsets must match the response length");
        else if (!data.log_offset.allFinite())
            errs.push_back("data: log offsets must be finite (offsets must be positive)");
    } else if (data.log_offset.size() != 0) {
        errs.push_back("data: log offsets supplied but the spec declares no offset");
    }

    if (spec.include_nugget && spec.family != Family::poisson)
        errs.push_back(
            "spec: the per-observation noise flag only applies to the poisson family "
            "(gaussian responses always carry sigma^2; binary_probit has no noise term)");

    if (!(spec.beta_variance > 0.0)) errs.push_back("spec: beta variance must be positive");
    if (!(spec.scale_prior.scale > 0.0) || !(spec.kappa2_prior.scale > 0.0) ||
        !(spec.tau_prior.scale > 0.0) || !(spec.sigma2_half_normal.scale > 0.0))
        errs.push_back("spec: hyperprior scales must be positive");
    if (!(spec.sigma2_inverse_gamma.shape > 0.0) || !(spec.sigma2_inverse_gamma.scale > 0.0))
        errs.push_back("spec: inverse-gamma prior needs positive shape and scale");
    for (const auto& [label, value] :
         std::initializer_list<std::pair<const char*, const std::optional<double>&>>{
             {"scale", spec.fixed_scale},
             {"kappa^2", spec.fixed_kappa2},
             {"sigma^2", spec.fixed_sigma2},
             {"tau", spec.fixed_tau}}) {
        if (value && !(*value > 0.0))
            errs.push_back(std::string("spec: fixed ") + label + " must be positive");
    }

    if (!data.active.empty()) {
        int prev = -1;
        for (int idx : data.active) {
            if (idx < 0 || idx >= n) {
                errs.push_back("data: active row " + std::to_string(idx) + " out of range");
                break;
            }
            if (idx <= prev) {
                errs.push_back("data: active rows must be strictly ascending");
                break;
            }
            prev = idx;
        }
    }

    if (!errs.empty()) throw ValidationError(std::move(errs));
}

// Conjugate Gaussian parameters for beta: precision X'X / resp_var +
// I / beta_variance, mean = precision^{-1} X' resid / resp_var. Dense
// because the design is short.
struct GaussianParams {
    Vector mean;
    Matrix covariance;
};

inline GaussianParams beta_conditional(const Matrix& x, const Vector& resid, double resp_var,
                                       double beta_variance) {
    if (x.rows() != resid.size())
        throw DimensionMismatch("beta conditional: design rows and residual length disagree");
    if (!(resp_var > 0.0) || !(beta_variance > 0.0))
        throw InvalidParams("beta conditional: variances must be positive");
    const Eigen::Index p = x.cols();
    Matrix precision = x.transpose() * x / resp_var;
    precision.diagonal().array() += 1.0 / beta_variance;
    const Eigen::LLT<Matrix> llt(precision);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefiniteError("beta conditional: precision is not positive definite");
    GaussianParams out;
    out.covariance = llt.solve(Matrix::Identity(p, p));
    out.mean = llt.solve(x.transpose() * resid / resp_var);
    return out;
}

inline Vector sample_mvn(const GaussianParams& params, Rng& rng) {
    const Eigen::LLT<Matrix> llt(params.covariance);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefiniteError("mvn draw: covariance is not positive definite");
    Vector z(params.mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return params.mean + Matrix(llt.matrixL()) * z;
}

namespace model_detail {

inline bool finite_values(const EigenSparse& m) {
    for (int outer = 0; outer < m.outerSize(); ++outer)
        for (EigenSparse::InnerIterator it(m, outer); it; ++it)
            if (!std::isfinite(it.value())) return false;
    return true;
}

// Unit-scale field prior precision: Q / xi^2 for the GRF, Delta' diag(aux)^-1
// Delta for the LMA. Returns nullopt when the assembly overflows (near-zero
// auxiliary variances), which callers treat as a rank-deficiency event.
inline std::optional<EigenSparse> prior_precision_eigen(const FieldStructure& s, PriorKind kind,
                                                        double scale, const Vector& aux) {
    if (kind == PriorKind::grf) {
        if (!(scale > 0.0)) throw InvalidParams("field prior: xi^2 must be positive");
        return EigenSparse(s.prior_q.eigen() / scale);
    }
    if (aux.size() != s.delta.rows())
        throw DimensionMismatch("field prior: auxiliary length does not match the operator");
    if ((aux.array() <= 0.0).any())
        throw InvalidParams("field prior: auxiliary variances must be positive");
    const Vector inv = aux.cwiseInverse();
    if (!inv.allFinite()) return std::nullopt;
    EigenSparse q = s.delta.eigen().transpose() * inv.asDiagonal() * s.delta.eigen();
    if (!finite_values(q)) return std::nullopt;
    return q;
}

}  // namespace model_detail

inline std::optional<SparseMatrix> field_prior_precision(const FieldStructure& s, PriorKind kind,
                                                         double scale, const Vector& aux) {
    auto prior = model_detail::prior_precision_eigen(s, kind, scale, aux);
    if (!prior) return std::nullopt;
    return symmetrized(*prior);
}

// Gaussian full conditional of the field on the linear-predictor scale:
// precision = prior + O'O / resp_var, mean term = O' resid / resp_var (the
// conditional mean is precision^{-1} times the mean term). Returns nullopt
// when the prior assembly overflows.
struct FieldConditional {
    SparseMatrix precision;
    Vector mean_term;
};

inline std::optional<FieldConditional> field_conditional(const FieldStructure& s, PriorKind kind,
                                                         double scale, const Vector& aux,
                                                         const SparseMatrix& obs,
                                                         const Vector& resid, double resp_var) {
    if (obs.rows() != resid.size())
        throw DimensionMismatch("field conditional: observation rows and residuals disagree");
    if (!(resp_var > 0.0))
        throw InvalidParams("field conditional: response variance must be positive");
    auto prior = model_detail::prior_precision_eigen(s, kind, scale, aux);
    if (!prior) return std::nullopt;
    EigenSparse q = *prior;
    q += EigenSparse(obs.eigen().transpose() * obs.eigen() / resp_var);
    if (!model_detail::finite_values(q)) return std::nullopt;
    FieldConditional out;
    out.precision = symmetrized(q);
    out.mean_term = obs.eigen().transpose() * resid / resp_var;
    return out;
}

// Penalized-regression view of the field prior, for diagnostics: the GRF
// contributes a squared penalty -(1/(2 xi^2)) ||Delta eta||^2 (scale = xi^2)
// and the LMA an L1 penalty -lambda ||Delta eta||_1 (scale = lambda), the
// exponential-mixture marginal the auxiliary scheme integrates out.
inline double penalty_logprior(const Vector& field, const FieldStructure& s, PriorKind kind,
                               double scale) {
    if (!(scale > 0.0)) throw InvalidParams("penalty: scale must be positive");
    if (kind == PriorKind::grf) {
        if (field.size() != s.prior_q.rows())
            throw DimensionMismatch("penalty: field length does not match the precision");
        return -0.5 * field.dot((s.prior_q.eigen() * field)) / scale;
    }
    if (field.size() != s.delta.cols())
        throw DimensionMismatch("penalty: field length does not match the operator");
    return -scale * (s.delta.eigen() * field).lpNorm<1>();
}

// Bookkeeping for the LMA auxiliary updates.
struct AuxUpdateStats {
    long long floored = 0;
};

// Discrete-support Gibbs draw: S_i | t ~ GIG(1/2, lambda^2, t_i^2), i.e.
// S_i^{-1} ~ InvGauss(sqrt(lambda^2 / t_i^2), lambda^2). t_i = 0 falls back
// to the exact b = 0 Gamma branch (valid because the order 1/2 is positive).
inline void lma_s_gibbs(Vector& s, const Vector& t, double lambda2, Rng& rng) {
    if (s.size() != t.size()) throw DimensionMismatch("s update: dimensions disagree");
    if (!(lambda2 > 0.0)) throw InvalidParams("s update: lambda^2 must be positive");
    constexpr double kZero = 10.0 * std::numeric_limits<double>::epsilon();
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double t2 = t[i] * t[i];
        if (t2 < kZero)
            s[i] = sample_gamma(0.5, 2.0 / lambda2, rng);
        else
            s[i] = 1.0 / sample_invgauss(std::sqrt(lambda2 / t2), lambda2, rng);
    }
}

// Continuous-support Gibbs draw: Gamma_i | t ~ GIG(tau C_ii - 1/2,
// 2 / lambda^2, t_i^2). t_i = 0 uses the exact b = 0 Gamma branch when the
// order is positive; otherwise b is floored at 1e-12 and the event counted.
inline void lma_gamma_gibbs(Vector& gamma, const Vector& t, const Vector& shape_diag, double tau,
                            double lambda2, AuxUpdateStats& stats, Rng& rng) {
    if (gamma.size() != t.size() || gamma.size() != shape_diag.size())
        throw DimensionMismatch("gamma update: dimensions disagree");
    if (!(lambda2 > 0.0) || !(tau > 0.0))
        throw InvalidParams("gamma update: tau and lambda^2 must be positive");
    constexpr double kZero = 10.0 * std::numeric_limits<double>::epsilon();
    for (Eigen::Index i = 0; i < gamma.size(); ++i) {
        const double p = tau * shape_diag[i] - 0.5;
        double b = t[i] * t[i];
        if (b < kZero && p <= 0.0) {
            b = 1e-12;
            ++stats.floored;
        }
        gamma[i] = sample_gig(GigParams(p, 2.0 / lambda2, b), rng);
    }
}

// Continuous-support one-at-a-time MH on Gamma (the default auxiliary
// route): log-random-walk against the Gamma(tau C_ii, lambda^2) prior times
// the N(0, Gamma_i) density of t_i.
inline void lma_gamma_mh(Vector& gamma, const Vector& t, const Vector& shape_diag, double tau,
                         double lambda2, std::vector<AdaptiveTuner>& tuners, Rng& rng) {
    if (gamma.size() != t.size() || gamma.size() != shape_diag.size())
        throw DimensionMismatch("gamma update: dimensions disagree");
    if (static_cast<std::size_t>(gamma.size()) != tuners.size())
        throw DimensionMismatch("gamma update: one tuner per component required");
    if (!(lambda2 > 0.0) || !(tau > 0.0))
        throw InvalidParams("gamma update: tau and lambda^2 must be positive");
    for (Eigen::Index i = 0; i < gamma.size(); ++i) {
        const double shape = tau * shape_diag[i];
        const double ti = t[i];
        const auto target = [&](double g) {
            return gamma_logpdf(g, shape, lambda2) + normal_logpdf(ti, 0.0, std::sqrt(g));
        };
        gamma[i] = adaptive_mh_scalar_log(target, gamma[i], tuners[static_cast<std::size_t>(i)],
                                          rng)
                       .first;
    }
}

namespace model_detail {

// log Phi(x) with an asymptotic fallback once erfc underflows.
inline double log_normal_cdf(double x) {
    const double erfc_val = std::erfc(-x / std::sqrt(2.0));
    if (erfc_val > 0.0) return std::log(0.5 * erfc_val);
    return normal_logpdf(x, 0.0, 1.0) - std::log(-x);
}

}  // namespace model_detail

// Per-observation log density at a linear-predictor value. sigma2 is the
// gaussian residual variance and is ignored by the other families; the
// poisson linear predictor must already include any offset and noise term.
inline double obs_logdensity(Family family, double y, double lin_pred, double sigma2) {
    switch (family) {
        case Family::gaussian:
            return normal_logpdf(y, lin_pred, std::sqrt(sigma2));
        case Family::binary_probit:
            return y > 0.5 ? model_detail::log_normal_cdf(lin_pred)
                           : model_detail::log_normal_cdf(-lin_pred);
        case Family::poisson:
            return y * lin_pred - std::exp(lin_pred) - std::lgamma(y + 1.0);
    }
    throw InvalidParams("obs logdensity: unknown family");
}

}  // namespace sglmm
