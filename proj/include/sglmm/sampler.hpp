#pragma once

// Single-chain MCMC driver for SGLMM posteriors: family-specific sweeps over
// (beta, field, auxiliaries, variances, range), burn-in-only adaptation,
// thinning, and per-state predictive densities for held-out rows.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sglmm/distributions.hpp"
#include "sglmm/errors.hpp"
#include "sglmm/mcmc.hpp"
#include "sglmm/models.hpp"
#include "sglmm/rng.hpp"
#include "sglmm/sparse.hpp"

namespace sglmm {

struct McmcConfig {
    long long burn_in = 10000;
    long long n_store = 50000;
    int thin = 1;
    std::uint64_t seed = 1;
    bool store_field = false;
};

// Stored chain output. Parameter traces are column-per-name; the combined
// trace beta0_plus_field_mean tracks the identifiable sum of the intercept
// and the field average. held_out_loglik holds, per stored state, the log
// predictive density of every inactive row (the cross-validation input).
struct PosteriorSamples {
    ModelSpec spec;
    std::vector<std::string> names;
    std::vector<std::vector<double>> draws;
    std::vector<double> loglik;
    std::vector<int> held_out_rows;
    std::vector<Vector> held_out_loglik;
    std::vector<Vector> field_draws;  // populated when store_field is set
    Vector field_mean;                // posterior mean over stored states
    int field_size = 0;
    double seconds = 0.0;            // total wall clock for the run
    double seconds_post_burn = 0.0;  // sampling phase only, the ESS/sec denominator
    std::uint64_t seed = 0;
    long long rank_deficiency_events = 0;
    long long retries_exhausted = 0;
    long long floored_auxiliaries = 0;

    int n_stored() const { return static_cast<int>(loglik.size()); }

    bool has(const std::string& name) const {
        for (const auto& n : names)
            if (n == name) return true;
        return false;
    }

    const std::vector<double>& column(const std::string& name) const {
        for (std::size_t j = 0; j < names.size(); ++j)
            if (names[j] == name) return draws[j];
        throw InvalidParams("posterior samples: no column named '" + name + "'");
    }
};

namespace sampler_detail {

inline SparseMatrix rows_subset(const SparseMatrix& m, const std::vector<int>& rows) {
    std::vector<int> position(static_cast<std::size_t>(m.rows()), -1);
    for (std::size_t r = 0; r < rows.size(); ++r) position[rows[r]] = static_cast<int>(r);
    std::vector<Triplet> triplets;
    const EigenSparse& e = m.eigen();
    for (int outer = 0; outer < e.outerSize(); ++outer)
        for (EigenSparse::InnerIterator it(e, outer); it; ++it) {
            const int pos = position[static_cast<std::size_t>(it.row())];
            if (pos >= 0) triplets.emplace_back(pos, static_cast<int>(it.col()), it.value());
        }
    return SparseMatrix::from_triplets(static_cast<Eigen::Index>(rows.size()), m.cols(),
                                       triplets, false);
}

inline Vector gather(const Vector& v, const std::vector<int>& idx) {
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[idx[i]];
    return out;
}

inline Matrix gather_rows(const Matrix& m, const std::vector<int>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
    return out;
}

}  // namespace sampler_detail

class Sampler {
  public:
    Sampler(ModelSpec spec, Support support, ModelData data, McmcConfig config)
        : spec_(std::move(spec)),
          support_(std::move(support)),
          data_(std::move(data)),
          config_(config),
          rng_(config.seed) {
        if (config_.burn_in < 0) throw InvalidParams("mcmc config: burn-in must be >= 0");
        if (config_.n_store < 1) throw InvalidParams("mcmc config: must store at least one state");
        if (config_.thin < 1) throw InvalidParams("mcmc config: thinning must be >= 1");
        n_field_ = support_field_size(support_);
        validate_model(spec_, data_, n_field_);

        n_obs_ = static_cast<int>(data_.y.size());
        p_ = spec_.covariates;
        active_ = resolve_active(data_);
        for (int i = 0, a = 0; i < n_obs_; ++i) {
            if (a < static_cast<int>(active_.size()) && active_[a] == i)
                ++a;
            else
                held_out_.push_back(i);
        }
        n_act_ = static_cast<int>(active_.size());

        y_act_ = sampler_detail::gather(data_.y, active_);
        x_act_ = sampler_detail::gather_rows(data_.x, active_);
        obs_act_ = sampler_detail::rows_subset(data_.obs, active_);
        off_act_ = spec_.has_offset ? sampler_detail::gather(data_.log_offset, active_)
                                    : Vector(Vector::Zero(n_act_));
        if (!held_out_.empty()) {
            y_held_ = sampler_detail::gather(data_.y, held_out_);
            x_held_ = sampler_detail::gather_rows(data_.x, held_out_);
            obs_held_ = sampler_detail::rows_subset(data_.obs, held_out_);
            off_held_ = spec_.has_offset
                            ? sampler_detail::gather(data_.log_offset, held_out_)
                            : Vector(Vector::Zero(static_cast<Eigen::Index>(held_out_.size())));
        }
        mass_diag_ = support_mass_diagonal(support_);

        beta_ = Vector::Zero(p_);
        field_ = Vector::Zero(n_field_);
        sigma2_ = spec_.fixed_sigma2.value_or(1.0);
        scale_ = spec_.fixed_scale.value_or(1.0);
        kappa2_ = spec_.fixed_kappa2.value_or(1.0);
        tau_ = spec_.fixed_tau.value_or(1.0);
        structure_ = support_structure(support_, spec_.prior, kappa2_);
        if (spec_.prior == PriorKind::lma) aux_ = Vector::Ones(n_field_);
        if (spec_.family == Family::poisson && spec_.include_nugget)
            eps_ = Vector::Zero(n_obs_);
        if (spec_.family == Family::binary_probit) {
            z_act_ = Vector(n_act_);
            for (int r = 0; r < n_act_; ++r) z_act_[r] = y_act_[r] > 0.5 ? 0.7 : -0.7;
        }

        if (spec_.family == Family::poisson) {
            t_field_.assign(static_cast<std::size_t>(n_field_), AdaptiveTuner(1.0));
            t_beta_.assign(static_cast<std::size_t>(p_), AdaptiveTuner(1.0));
            if (spec_.include_nugget)
                t_eps_.assign(static_cast<std::size_t>(n_act_), AdaptiveTuner(1.0));
            build_obs_adjacency();
        }
        if (spec_.prior == PriorKind::lma && support_is_continuous(support_) &&
            !spec_.gamma_update_gibbs)
            t_gamma_.assign(static_cast<std::size_t>(n_field_), AdaptiveTuner(1.0));

        names_.reserve(static_cast<std::size_t>(p_) + 5);
        for (int j = 0; j < p_; ++j) names_.push_back("beta_" + std::to_string(j));
        if (has_sigma2()) names_.push_back("sigma2");
        names_.push_back(spec_.prior == PriorKind::grf ? "xi2" : "lambda2");
        if (has_tau()) names_.push_back("tau");
        names_.push_back("kappa2");
        names_.push_back("beta0_plus_field_mean");
    }

    PosteriorSamples run() {
        const auto t0 = std::chrono::steady_clock::now();
        PosteriorSamples out;
        out.spec = spec_;
        out.names = names_;
        out.draws.assign(names_.size(), {});
        for (auto& d : out.draws) d.reserve(static_cast<std::size_t>(config_.n_store));
        out.loglik.reserve(static_cast<std::size_t>(config_.n_store));
        out.held_out_rows = held_out_;
        out.field_size = n_field_;
        out.seed = config_.seed;

        for (long long s = 0; s < config_.burn_in; ++s) sweep();
        const auto t1 = std::chrono::steady_clock::now();
        freeze_tuners();
        field_sum_ = Vector::Zero(n_field_);
        const long long total = config_.n_store * static_cast<long long>(config_.thin);
        for (long long s = 0; s < total; ++s) {
            sweep();
            if ((s + 1) % config_.thin == 0) store(out);
        }
        out.field_mean = field_sum_ / static_cast<double>(config_.n_store);

        const auto t2 = std::chrono::steady_clock::now();
        out.seconds = std::chrono::duration<double>(t2 - t0).count();
        out.seconds_post_burn = std::chrono::duration<double>(t2 - t1).count();
        out.rank_deficiency_events = pd_stats_.rank_deficiency_events;
        out.retries_exhausted = pd_stats_.retries_exhausted;
        out.floored_auxiliaries = aux_stats_.floored;
        return out;
    }

  private:
    bool has_sigma2() const {
        return spec_.family == Family::gaussian ||
               (spec_.family == Family::poisson && spec_.include_nugget);
    }
    bool has_tau() const {
        return spec_.prior == PriorKind::lma && support_is_continuous(support_);
    }

    void build_obs_adjacency() {
        col_entries_.assign(static_cast<std::size_t>(n_field_), {});
        row_entries_.assign(static_cast<std::size_t>(n_act_), {});
        const EigenSparse& e = obs_act_.eigen();
        for (int outer = 0; outer < e.outerSize(); ++outer)
            for (EigenSparse::InnerIterator it(e, outer); it; ++it) {
                const int r = static_cast<int>(it.row());
                const int c = static_cast<int>(it.col());
                col_entries_[static_cast<std::size_t>(c)].emplace_back(r, it.value());
                row_entries_[static_cast<std::size_t>(r)].emplace_back(c, it.value());
            }
    }

    void freeze_tuners() {
        t_sigma2_.freeze();
        t_scale_.freeze();
        t_kappa2_.freeze();
        t_tau_.freeze();
        t_pair_.freeze();
        for (auto& t : t_field_) t.freeze();
        for (auto& t : t_beta_) t.freeze();
        for (auto& t : t_eps_) t.freeze();
        for (auto& t : t_gamma_) t.freeze();
    }

    void record_rank_event() {
        ++pd_stats_.rank_deficiency_events;
        if (++pd_stats_.consecutive_failures >= 25) {
            ++pd_stats_.retries_exhausted;
            pd_stats_.consecutive_failures = 0;
        }
    }

    void sweep() {
        if (spec_.family == Family::binary_probit) update_z();
        update_beta();
        update_field();
        if (spec_.family == Family::poisson && spec_.include_nugget) update_eps();
        update_sigma2();
        update_hyperparameters();
    }

    // --- conditional updates -------------------------------------------------

    void update_z() {
        const Vector lp = x_act_ * beta_ + Vector(obs_act_.eigen() * field_);
        for (int r = 0; r < n_act_; ++r)
            z_act_[r] = sample_truncnorm(
                lp[r], 1.0, y_act_[r] > 0.5 ? TruncSide::positive : TruncSide::negative, rng_);
    }

    void update_beta() {
        if (spec_.family == Family::poisson) {
            Vector lp = x_act_ * beta_ + Vector(obs_act_.eigen() * field_) + off_act_;
            if (spec_.include_nugget) lp += sampler_detail::gather(eps_, active_);
            for (int j = 0; j < p_; ++j) {
                const auto target = [&](double v) {
                    double out = -v * v / (2.0 * spec_.beta_variance);
                    for (int r = 0; r < n_act_; ++r) {
                        const double l = lp[r] + x_act_(r, j) * (v - beta_[j]);
                        out += y_act_[r] * l - std::exp(l);
                    }
                    return out;
                };
                const auto [value, accepted] =
                    adaptive_mh_scalar(target, beta_[j], t_beta_[static_cast<std::size_t>(j)],
                                       rng_);
                if (accepted) {
                    lp += x_act_.col(j) * (value - beta_[j]);
                    beta_[j] = value;
                }
            }
            return;
        }
        const Vector& response = spec_.family == Family::gaussian ? y_act_ : z_act_;
        const double resp_var = spec_.family == Family::gaussian ? sigma2_ : 1.0;
        const Vector resid = response - Vector(obs_act_.eigen() * field_);
        beta_ = sample_mvn(beta_conditional(x_act_, resid, resp_var, spec_.beta_variance), rng_);
    }

    // Proposal pass for the LMA auxiliaries given the current field; each
    // component sees only its own t_i, so the pass factorizes over
    // conditionally independent coordinates and stays reversible as required
    // by the rejection semantics of the PD-constrained update.
    void propose_aux(Vector& candidate, Rng& rng) {
        const Vector t = Vector(structure_.delta.eigen() * field_);
        if (!support_is_continuous(support_)) {
            lma_s_gibbs(candidate, t, scale_, rng);
        } else if (spec_.gamma_update_gibbs) {
            lma_gamma_gibbs(candidate, t, mass_diag_, tau_, scale_, aux_stats_, rng);
        } else {
            lma_gamma_mh(candidate, t, mass_diag_, tau_, scale_, t_gamma_, rng);
        }
    }

    void update_field() {
        if (spec_.family == Family::poisson) {
            update_field_poisson();
            return;
        }
        const Vector& response = spec_.family == Family::gaussian ? y_act_ : z_act_;
        const double resp_var = spec_.family == Family::gaussian ? sigma2_ : 1.0;
        const Vector resid = response - x_act_ * beta_;
        Vector mean_term;
        const auto propose = [&](Vector& candidate, Rng& rng) {
            if (spec_.prior == PriorKind::lma) propose_aux(candidate, rng);
        };
        const auto factor = [&](const Vector& aux) -> std::optional<CholeskyFactor> {
            auto conditional = field_conditional(structure_, spec_.prior, scale_, aux, obs_act_,
                                                 resid, resp_var);
            if (!conditional) return std::nullopt;
            mean_term = std::move(conditional->mean_term);
            return factorize(conditional->precision);
        };
        const auto draw = [&](const CholeskyFactor& f, Rng& rng) {
            return f.sample_gaussian_precision(mean_term, rng);
        };
        pd_constrained_joint_update(aux_, field_, propose, factor, draw, pd_stats_, rng_);
    }

    // Count responses move one node at a time under the CAR representation
    // of the current field prior. The LMA auxiliary proposal is vetoed on
    // assembly failure exactly like the joint update, so a numerically
    // rank-deficient candidate retains the previous (aux, field) state.
    void update_field_poisson() {
        std::optional<SparseMatrix> prior;
        if (spec_.prior == PriorKind::lma) {
            Vector candidate = aux_;
            propose_aux(candidate, rng_);
            prior = field_prior_precision(structure_, spec_.prior, scale_, candidate);
            if (!prior) {
                record_rank_event();
                return;
            }
            aux_ = std::move(candidate);
        } else {
            prior = field_prior_precision(structure_, spec_.prior, scale_, aux_);
            if (!prior) {
                record_rank_event();
                return;
            }
        }
        pd_stats_.consecutive_failures = 0;

        const CarDecomposition car = car_decompose(*prior);
        const std::vector<std::vector<int>> blocks = color_blocks(*prior);
        Vector base = x_act_ * beta_ + off_act_;
        if (spec_.include_nugget) base += sampler_detail::gather(eps_, active_);
        const auto response = [&](int i, double v) {
            double out = 0.0;
            for (const auto& [r, w] : col_entries_[static_cast<std::size_t>(i)]) {
                double lp = base[r] + w * v;
                for (const auto& [k, w2] : row_entries_[static_cast<std::size_t>(r)])
                    if (k != i) lp += w2 * field_[k];
                out += y_act_[r] * lp - std::exp(lp);
            }
            return out;
        };
        one_at_a_time_block_update(field_, car, blocks, response, t_field_, rng_);
    }

    void update_eps() {
        const Vector base = x_act_ * beta_ + Vector(obs_act_.eigen() * field_) + off_act_;
        for (int r = 0; r < n_act_; ++r) {
            const auto target = [&](double e) {
                const double lp = base[r] + e;
                return y_act_[r] * lp - std::exp(lp) - e * e / (2.0 * sigma2_);
            };
            eps_[active_[r]] =
                adaptive_mh_scalar(target, eps_[active_[r]], t_eps_[static_cast<std::size_t>(r)],
                                   rng_)
                    .first;
        }
    }

    void update_sigma2() {
        if (!has_sigma2() || spec_.fixed_sigma2) return;
        double ss = 0.0;
        if (spec_.family == Family::gaussian) {
            const Vector resid = y_act_ - x_act_ * beta_ - Vector(obs_act_.eigen() * field_);
            ss = resid.squaredNorm();
        } else {
            ss = sampler_detail::gather(eps_, active_).squaredNorm();
        }
        const double n_half = 0.5 * n_act_;
        if (spec_.sigma2_prior == SigmaPriorKind::inverse_gamma) {
            const double shape = spec_.sigma2_inverse_gamma.shape + n_half;
            const double scale = spec_.sigma2_inverse_gamma.scale + 0.5 * ss;
            sigma2_ = 1.0 / sample_gamma(shape, 1.0 / scale, rng_);
            return;
        }
        const auto target = [&](double v) {
            return -n_half * std::log(v) - 0.5 * ss / v + spec_.sigma2_half_normal.log_term(v);
        };
        sigma2_ = adaptive_mh_scalar_log(target, sigma2_, t_sigma2_, rng_).first;
    }

    // Rebuilds the kappa^2-dependent structure for a proposed value,
    // translating the hard failures (non-positive or non-factorizable) into
    // a -inf log target so the move is rejected.
    double structure_target(double kappa2, const std::function<double(const FieldStructure&)>& f) {
        if (!(kappa2 > 0.0) || !std::isfinite(kappa2))
            return -std::numeric_limits<double>::infinity();
        try {
            const FieldStructure s = support_structure(support_, spec_.prior, kappa2);
            return f(s);
        } catch (const NotPositiveDefiniteError&) {
            return -std::numeric_limits<double>::infinity();
        }
    }

    template <typename Target>
    void pair_log_update(double& a, double& b, const Target& target, AdaptiveTuner& tuner) {
        const double t0 = target(a, b);
        if (!std::isfinite(t0))
            throw NonFiniteTarget("pair update: log target is not finite at the current state");
        const double s = tuner.scale();
        const double ca = a * std::exp(s * rng_.normal());
        const double cb = b * std::exp(s * rng_.normal());
        const double t1 = target(ca, cb);
        const bool accept = std::log(rng_.uniform()) <
                            t1 - t0 + std::log(ca) - std::log(a) + std::log(cb) - std::log(b);
        tuner.record(accept);
        if (accept) {
            a = ca;
            b = cb;
        }
    }

    void update_hyperparameters() {
        const bool joint = spec_.joint_hyper_proposals.value_or(support_is_continuous(support_));
        const double old_kappa2 = kappa2_;

        if (spec_.prior == PriorKind::grf) {
            const double n_half = 0.5 * n_field_;
            const auto quadform = [&](const FieldStructure& s) {
                return field_.dot(Vector(s.prior_q.eigen() * field_));
            };
            const double qf_current = quadform(structure_);
            if (joint && !spec_.fixed_scale && !spec_.fixed_kappa2) {
                const auto target = [&](double k2, double x2) {
                    if (!(x2 > 0.0)) return -std::numeric_limits<double>::infinity();
                    return structure_target(k2, [&](const FieldStructure& s) {
                        return s.half_logdet - n_half * std::log(x2) - 0.5 * quadform(s) / x2 +
                               spec_.kappa2_prior.log_term(k2) + spec_.scale_prior.log_term(x2);
                    });
                };
                pair_log_update(kappa2_, scale_, target, t_pair_);
            } else {
                if (!spec_.fixed_scale) {
                    const auto target = [&](double v) {
                        return -n_half * std::log(v) - 0.5 * qf_current / v +
                               spec_.scale_prior.log_term(v);
                    };
                    scale_ = adaptive_mh_scalar_log(target, scale_, t_scale_, rng_).first;
                }
                if (!spec_.fixed_kappa2) {
                    const auto target = [&](double v) {
                        return structure_target(v, [&](const FieldStructure& s) {
                            return s.half_logdet - 0.5 * quadform(s) / scale_ +
                                   spec_.kappa2_prior.log_term(v);
                        });
                    };
                    kappa2_ = adaptive_mh_scalar_log(target, kappa2_, t_kappa2_, rng_).first;
                }
            }
        } else {
            if (support_is_continuous(support_)) {
                const auto aux_logprior = [&](double tau, double lambda2) {
                    if (!(tau > 0.0) || !(lambda2 > 0.0))
                        return -std::numeric_limits<double>::infinity();
                    double out = 0.0;
                    for (int i = 0; i < n_field_; ++i)
                        out += gamma_logpdf(aux_[i], tau * mass_diag_[i], lambda2);
                    return out;
                };
                if (joint && !spec_.fixed_tau && !spec_.fixed_scale) {
                    const auto target = [&](double tau, double lambda2) {
                        return aux_logprior(tau, lambda2) + spec_.tau_prior.log_term(tau) +
                               spec_.scale_prior.log_term(lambda2);
                    };
                    pair_log_update(tau_, scale_, target, t_pair_);
                } else {
                    if (!spec_.fixed_scale) {
                        const auto target = [&](double v) {
                            return aux_logprior(tau_, v) + spec_.scale_prior.log_term(v);
                        };
                        scale_ = adaptive_mh_scalar_log(target, scale_, t_scale_, rng_).first;
                    }
                    if (!spec_.fixed_tau) {
                        const auto target = [&](double v) {
                            return aux_logprior(v, scale_) + spec_.tau_prior.log_term(v);
                        };
                        tau_ = adaptive_mh_scalar_log(target, tau_, t_tau_, rng_).first;
                    }
                }
            } else if (!spec_.fixed_scale) {
                const auto target = [&](double v) {
                    double out = spec_.scale_prior.log_term(v);
                    for (int i = 0; i < n_field_; ++i)
                        out += exponential_logpdf(aux_[i], 0.5 * v);
                    return out;
                };
                scale_ = adaptive_mh_scalar_log(target, scale_, t_scale_, rng_).first;
            }
            if (!spec_.fixed_kappa2) {
                const auto target = [&](double v) {
                    return structure_target(v, [&](const FieldStructure& s) {
                        const Vector t = Vector(s.delta.eigen() * field_);
                        double out = s.half_logdet + spec_.kappa2_prior.log_term(v);
                        for (int i = 0; i < n_field_; ++i)
                            out -= 0.5 * t[i] * t[i] / aux_[i];
                        return out;
                    });
                };
                kappa2_ = adaptive_mh_scalar_log(target, kappa2_, t_kappa2_, rng_).first;
            }
        }

        if (kappa2_ != old_kappa2)
            structure_ = support_structure(support_, spec_.prior, kappa2_);
    }

    // --- output --------------------------------------------------------------

    double current_loglik() const {
        Vector lp = x_act_ * beta_ + Vector(obs_act_.eigen() * field_) + off_act_;
        if (spec_.family == Family::poisson && spec_.include_nugget)
            lp += sampler_detail::gather(eps_, active_);
        double out = 0.0;
        for (int r = 0; r < n_act_; ++r)
            out += obs_logdensity(spec_.family, y_act_[r], lp[r], sigma2_);
        return out;
    }

    // Log predictive density of each held-out row at the current state. The
    // Poisson noise term has no closed-form marginal, so one fresh prior
    // draw per state stands in for it (unbiased for the predictive density
    // once averaged over stored states).
    Vector held_out_logdensities() {
        Vector lp = x_held_ * beta_ + Vector(obs_held_.eigen() * field_) + off_held_;
        if (spec_.family == Family::poisson && spec_.include_nugget)
            for (Eigen::Index r = 0; r < lp.size(); ++r)
                lp[r] += rng_.normal(0.0, std::sqrt(sigma2_));
        Vector out(lp.size());
        for (Eigen::Index r = 0; r < lp.size(); ++r)
            out[r] = obs_logdensity(spec_.family, y_held_[r], lp[r], sigma2_);
        return out;
    }

    void store(PosteriorSamples& out) {
        std::size_t j = 0;
        for (int b = 0; b < p_; ++b) out.draws[j++].push_back(beta_[b]);
        if (has_sigma2()) out.draws[j++].push_back(sigma2_);
        out.draws[j++].push_back(scale_);
        if (has_tau()) out.draws[j++].push_back(tau_);
        out.draws[j++].push_back(kappa2_);
        out.draws[j++].push_back(beta_[0] + field_.mean());
        out.loglik.push_back(current_loglik());
        field_sum_ += field_;
        if (!held_out_.empty()) out.held_out_loglik.push_back(held_out_logdensities());
        if (config_.store_field) out.field_draws.push_back(field_);
    }

    ModelSpec spec_;
    Support support_;
    ModelData data_;
    McmcConfig config_;
    Rng rng_;

    int n_obs_ = 0, n_act_ = 0, n_field_ = 0, p_ = 0;
    std::vector<int> active_, held_out_;
    Vector y_act_, off_act_, y_held_, off_held_;
    Matrix x_act_, x_held_;
    SparseMatrix obs_act_, obs_held_;
    Vector mass_diag_;
    std::vector<std::vector<std::pair<int, double>>> col_entries_, row_entries_;

    Vector beta_, field_, aux_, eps_, z_act_;
    Vector field_sum_;
    double sigma2_ = 1.0, scale_ = 1.0, kappa2_ = 1.0, tau_ = 1.0;
    FieldStructure structure_;

    AdaptiveTuner t_sigma2_{1.0}, t_scale_{1.0}, t_kappa2_{1.0}, t_tau_{1.0};
    AdaptiveTuner t_pair_{1.0, 0.35};
    std::vector<AdaptiveTuner> t_field_, t_beta_, t_eps_, t_gamma_;
    PdJointStats pd_stats_;
    AuxUpdateStats aux_stats_;
    std::vector<std::string> names_;
};

inline PosteriorSamples run_chain(const ModelSpec& spec, const Support& support,
                                  const ModelData& data, const McmcConfig& config) {
    Sampler sampler(spec, support, data, config);
    return sampler.run();
}

}  // namespace sglmm
