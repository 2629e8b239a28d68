#ifndef COGARCH_PBEF_HPP
#define COGARCH_PBEF_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cogarch/common.hpp"
#include "cogarch/levy.hpp"
#include "cogarch/moments.hpp"

namespace cogarch {

/// Minimum mean square error predictor of the next squared return from the
/// previous q squared returns: pi = a0 + sum_j a_j G^2_{(i-j)r,r}.
struct PredictorCoeffs {
    int q = 0;
    Eigen::VectorXd a_tilde;  ///< (a0, a1, ..., aq)
    Eigen::MatrixXd C;        ///< q x q covariance of lagged squared returns
    Eigen::VectorXd b;        ///< cross-covariances with the predicted return
    Eigen::MatrixXd C_tilde;  ///< (q+1) x (q+1) second moments E(Z Z^T)
};

/// Assembles C, b, a = C^{-1} b from the order-4 joint return moments and
/// a0 from the stationarity identity a0 = (1 - sum a_j) E G^2_r.
inline PredictorCoeffs predictor_coeffs(const MomentCache& cache, int q, double lag_r) {
    if (q < 0) throw std::invalid_argument("predictor_coeffs: q must be >= 0");
    const double eg2 = cache.marginal_g_moment(1, lag_r);

    // cross2[m] = E( G^2_{0,r} G^2_{mr,r} ), cross2[0] = E G^4_r
    std::vector<double> cross2(static_cast<std::size_t>(q) + 1);
    cross2[0] = cache.marginal_g_moment(2, lag_r);
    for (int m = 1; m <= q; ++m)
        cross2[static_cast<std::size_t>(m)] =
            joint_return_moment(cache, {{0.0, 1}, {m * lag_r, 1}}, lag_r);

    PredictorCoeffs pc;
    pc.q = q;
    pc.C.resize(q, q);
    pc.b.resize(q);
    for (int i = 0; i < q; ++i) {
        pc.b(i) = cross2[static_cast<std::size_t>(i + 1)] - eg2 * eg2;
        for (int j = 0; j < q; ++j)
            pc.C(i, j) = cross2[static_cast<std::size_t>(std::abs(i - j))] - eg2 * eg2;
    }

    Eigen::VectorXd a = Eigen::VectorXd::Zero(q);
    if (q > 0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pc.C);
        const double lmin = es.eigenvalues().minCoeff();
        const double lmax = es.eigenvalues().maxCoeff();
        if (!(lmin > 0.0) || lmax / lmin > 1e12)
            throw numeric_error("predictor_coeffs: degenerate predictor space");
        a = pc.C.ldlt().solve(pc.b);
    }
    pc.a_tilde.resize(q + 1);
    pc.a_tilde(0) = (1.0 - a.sum()) * eg2;
    pc.a_tilde.tail(q) = a;

    pc.C_tilde.resize(q + 1, q + 1);
    pc.C_tilde(0, 0) = 1.0;
    for (int i = 1; i <= q; ++i) {
        pc.C_tilde(0, i) = pc.C_tilde(i, 0) = eg2;
        for (int j = 1; j <= q; ++j)
            pc.C_tilde(i, j) = cross2[static_cast<std::size_t>(std::abs(i - j))];
    }
    return pc;
}

/// a_tilde at theta from a fresh order-2 moment engine.
inline Eigen::VectorXd a_tilde_of(const LevyModel& model, const Theta& theta, int q,
                                  double lag_r) {
    MomentCache cache(model, theta, 2);
    return predictor_coeffs(cache, q, lag_r).a_tilde;
}

/// d a_tilde / d theta^T, (q+1) x 3, by central differences with relative
/// step 1e-5 per coordinate.
inline Eigen::MatrixXd d_a_tilde(const LevyModel& model, const Theta& theta, int q, double lag_r,
                                 double rel_step = 1e-5) {
    Eigen::MatrixXd grad(q + 1, 3);
    const double base[3] = {theta.beta, theta.eta, theta.phi};
    for (int c = 0; c < 3; ++c) {
        const double h = rel_step * base[c];
        double up[3] = {base[0], base[1], base[2]};
        double dn[3] = {base[0], base[1], base[2]};
        up[c] += h;
        dn[c] -= h;
        const Eigen::VectorXd fu = a_tilde_of(model, Theta(up[0], up[1], up[2]), q, lag_r);
        const Eigen::VectorXd fd = a_tilde_of(model, Theta(dn[0], dn[1], dn[2]), q, lag_r);
        grad.col(c) = (fu - fd) / (2.0 * h);
    }
    return grad;
}

namespace detail_pbef {

// Transfer operators on the sigma^2-power state space (dim k_max+1 <= 5).
// P propagates one observation lag with no return factor, U[i] absorbs a
// return of power i over one lag, stat closes a chain against the
// stationary sigma moments. Together with the tower identity
//   J_{kir}(h, d) = sum_s J_{kis}(h, 0) J_{s0r}(d, 0)
// they express any joint return moment as a product of small matrices,
// which is what makes the M-matrix affordable at large predictor orders.
struct TransferOps {
    int dim;
    long double P[5][5] = {};
    long double U[5][5][5] = {};
    long double stat[5] = {};

    TransferOps(const MomentCache& cache, double lag_r) : dim(cache.k_max() + 1) {
        const JTable& jt = cache.jtable();
        for (int s = 0; s < dim; ++s)
            for (int r = 0; r <= s; ++r) P[s][r] = jt.at(s, 0, r).eval(lag_r, 0.0);
        for (int i = 1; i < dim; ++i)
            for (int a = 0; a + i < dim; ++a)
                for (int r = 0; r <= a + i; ++r)
                    U[i][a][r] = jt.at(a + i, i, r).eval(lag_r, 0.0);
        for (int a = 0; a < dim; ++a) stat[a] = cache.stationary_sigma_moment(a);
    }
};

// Chain state: one sigma-power weight vector per subset of the two linear
// residual factors already absorbed (bit 0: first factor, bit 1: second).
struct ChainState {
    long double v[4][5] = {};

    void clear() {
        for (auto& row : v) std::fill(std::begin(row), std::end(row), 0.0L);
    }
};

// Processes one observation time (walking backwards in time): every state
// absorbs the mandatory point power `extra` there and optionally the linear
// factors whose support coefficients at that time are cA, cB.
inline void chain_step(const TransferOps& ops, const ChainState& in, ChainState& out,
                       long double cA, long double cB, int extra) {
    out.clear();
    for (int mask = 0; mask < 4; ++mask) {
        const long double* s = in.v[mask];
        bool nz = false;
        for (int a = 0; a < ops.dim; ++a)
            if (s[a] != 0.0L) { nz = true; break; }
        if (!nz) continue;
        const int maxA = (cA != 0.0L && !(mask & 1)) ? 1 : 0;
        const int maxB = (cB != 0.0L && !(mask & 2)) ? 1 : 0;
        for (int tA = 0; tA <= maxA; ++tA) {
            for (int tB = 0; tB <= maxB; ++tB) {
                const int i = extra + tA + tB;
                const int nm = mask | tA | (tB << 1);
                long double* o = out.v[nm];
                if (i == 0) {
                    for (int a = 0; a < ops.dim; ++a)
                        if (s[a] != 0.0L)
                            for (int r = 0; r <= a; ++r) o[r] += s[a] * ops.P[a][r];
                } else {
                    const long double coef = (tA ? cA : 1.0L) * (tB ? cB : 1.0L);
                    for (int a = 0; a + i < ops.dim; ++a)
                        if (s[a] != 0.0L)
                            for (int r = 0; r <= a + i; ++r)
                                o[r] += coef * s[a] * ops.U[i][a][r];
                }
            }
        }
    }
}

// Adjoint of chain_step: pulls a closing covector backwards across one time.
inline void chain_step_adjoint(const TransferOps& ops, const ChainState& g, ChainState& out,
                               long double cA, long double cB, int extra) {
    out.clear();
    for (int mask = 0; mask < 4; ++mask) {
        long double* o = out.v[mask];
        const int maxA = (cA != 0.0L && !(mask & 1)) ? 1 : 0;
        const int maxB = (cB != 0.0L && !(mask & 2)) ? 1 : 0;
        for (int tA = 0; tA <= maxA; ++tA) {
            for (int tB = 0; tB <= maxB; ++tB) {
                const int i = extra + tA + tB;
                const int nm = mask | tA | (tB << 1);
                const long double* gg = g.v[nm];
                if (i == 0) {
                    for (int a = 0; a < ops.dim; ++a)
                        for (int r = 0; r <= a; ++r) o[a] += ops.P[a][r] * gg[r];
                } else {
                    const long double coef = (tA ? cA : 1.0L) * (tB ? cB : 1.0L);
                    for (int a = 0; a + i < ops.dim; ++a)
                        for (int r = 0; r <= a + i; ++r) o[a] += coef * ops.U[i][a][r] * gg[r];
                }
            }
        }
    }
}

inline long double chain_dot(const ChainState& cov, const ChainState& st, int dim) {
    long double s = 0.0L;
    for (int mask = 0; mask < 4; ++mask)
        for (int a = 0; a < dim; ++a) s += cov.v[mask][a] * st.v[mask][a];
    return s;
}

// One (q+1) x (q+1) block E( H^v(theta) H^{v+k}(theta)^T ) for the
// prediction-error vector H^i = Z_i (y_i - a~' Z_i), evaluated exactly with
// prefix states and suffix covectors of the transfer chain. Entry (a, b)
// inserts the extra squared returns y_{v-a} and y_{v+k-b} (none for a or b
// equal to zero) into a chain carrying the two residual factors.
class HBlockBuilder {
public:
    HBlockBuilder(const TransferOps& ops, int q, const Eigen::VectorXd& a_tilde, int lag_k)
        : ops_(ops), q_(q), k_(lag_k), T_(lag_k + q + 1) {
        // supports over times t in [-q, k], stored at index t + q
        supA_.assign(static_cast<std::size_t>(T_), 0.0L);
        supB_.assign(static_cast<std::size_t>(T_), 0.0L);
        supA_[static_cast<std::size_t>(q_)] = 1.0L;              // y_v itself
        supB_[static_cast<std::size_t>(q_ + k_)] = 1.0L;         // y_{v+k}
        for (int j = 1; j <= q_; ++j) {
            supA_[static_cast<std::size_t>(q_ - j)] -= a_tilde(j);
            const int tb = k_ - j + q_;
            if (tb >= 0) supB_[static_cast<std::size_t>(tb)] -= a_tilde(j);
        }
        a0_ = a_tilde(0);
    }

    Eigen::MatrixXd build() {
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(q_ + 1, q_ + 1);
        Eigen::MatrixXd res(q_ + 1, q_ + 1);
        for (int actA = 0; actA < 2; ++actA) {
            for (int actB = 0; actB < 2; ++actB) {
                const double mult = (actA ? 1.0 : -a0_) * (actB ? 1.0 : -a0_);
                run_case(actA, actB, res);
                out += mult * res;
            }
        }
        return out;
    }

private:
    const TransferOps& ops_;
    int q_, k_, T_;
    std::vector<long double> supA_, supB_;
    double a0_ = 0.0;

    // per-case work buffers
    int full_mask_ = 0;
    std::vector<ChainState> fin_;   // state entering each time index
    std::vector<ChainState> qcov_;  // covector on the state entering each time index
    ChainState close_;

    long double cA(int ti) const { return full_mask_ & 1 ? supA_[static_cast<std::size_t>(ti)] : 0.0L; }
    long double cB(int ti) const { return full_mask_ & 2 ? supB_[static_cast<std::size_t>(ti)] : 0.0L; }

    const ChainState& qbelow(int ti) const {
        return ti > 0 ? qcov_[static_cast<std::size_t>(ti - 1)] : close_;
    }

    double query(int ti, int extra, const ChainState& base) const {
        ChainState tmp;
        chain_step(ops_, base, tmp, cA(ti), cB(ti), extra);
        return static_cast<double>(chain_dot(qbelow(ti), tmp, ops_.dim));
    }

    // continuation pass: states entering times below `ti0` after inserting a
    // point return there; stored only for the query window ti < q
    void continuation(int ti0, std::vector<ChainState>& store) const {
        ChainState cur, next;
        chain_step(ops_, fin_[static_cast<std::size_t>(ti0)], cur, cA(ti0), cB(ti0), 1);
        for (int ti = ti0 - 1; ti >= 0; --ti) {
            if (ti < q_) store[static_cast<std::size_t>(ti)] = cur;
            if (ti == 0) break;
            chain_step(ops_, cur, next, cA(ti), cB(ti), 0);
            std::swap(cur, next);
        }
    }

    void run_case(int actA, int actB, Eigen::MatrixXd& res) {
        full_mask_ = actA | (actB << 1);

        fin_.assign(static_cast<std::size_t>(T_), ChainState{});
        fin_[static_cast<std::size_t>(T_ - 1)].v[0][0] = 1.0L;
        ChainState fend;
        for (int ti = T_ - 1; ti >= 0; --ti) {
            ChainState& dst = ti > 0 ? fin_[static_cast<std::size_t>(ti - 1)] : fend;
            chain_step(ops_, fin_[static_cast<std::size_t>(ti)], dst, cA(ti), cB(ti), 0);
        }

        close_ = ChainState{};
        for (int a = 0; a < ops_.dim; ++a) close_.v[full_mask_][a] = ops_.stat[a];
        qcov_.assign(static_cast<std::size_t>(T_), ChainState{});
        for (int ti = 0; ti < T_; ++ti)
            chain_step_adjoint(ops_, qbelow(ti), qcov_[static_cast<std::size_t>(ti)], cA(ti),
                               cB(ti), 0);

        res(0, 0) = static_cast<double>(chain_dot(close_, fend, ops_.dim));

        // single insertions: res(a, 0) at time -a, res(0, b) at time k-b
        for (int a = 1; a <= q_; ++a) res(a, 0) = query(q_ - a, 1, fin_[static_cast<std::size_t>(q_ - a)]);
        for (int b = 1; b <= q_; ++b) res(0, b) = query(q_ + k_ - b, 1, fin_[static_cast<std::size_t>(q_ + k_ - b)]);

        // double insertions, reusing continuation states from whichever
        // insertion happens later in time
        std::vector<ChainState> cont(static_cast<std::size_t>(std::max(q_, 1)));
        std::vector<std::vector<ChainState>> cont_a;  // filled lazily per a
        cont_a.assign(static_cast<std::size_t>(q_) + 1, {});
        for (int b = 1; b <= q_; ++b) {
            const int tib = q_ + k_ - b;
            continuation(tib, cont);
            for (int a = 1; a <= q_; ++a) {
                const int tia = q_ - a;
                if (tia < tib) {
                    res(a, b) = query(tia, 1, cont[static_cast<std::size_t>(tia)]);
                } else if (tia == tib) {
                    res(a, b) = query(tia, 2, fin_[static_cast<std::size_t>(tia)]);
                } else {
                    auto& ca = cont_a[static_cast<std::size_t>(a)];
                    if (ca.empty()) {
                        ca.assign(static_cast<std::size_t>(std::max(q_, 1)), ChainState{});
                        continuation(tia, ca);
                    }
                    res(a, b) = query(tib, 1, ca[static_cast<std::size_t>(tib)]);
                }
            }
        }
    }
};

} // namespace detail_pbef

/// E( H^v(theta) ) for the prediction-error vector H; zero at any theta whose
/// a_tilde solves the normal equations.
inline Eigen::VectorXd expected_h_vector(const MomentCache& cache, int q, double lag_r,
                                         const Eigen::VectorXd& a_tilde) {
    // E H_a = E( y_{v-a}^{[a>0]} ( y_v - a~' Z_v ) ), expanded termwise
    Eigen::VectorXd out(q + 1);
    for (int a = 0; a <= q; ++a) {
        long double sum = 0.0L;
        auto pair_moment = [&](int pos) {
            std::vector<std::pair<double, int>> lags;
            if (a > 0) lags.emplace_back(0.0, 1);
            lags.emplace_back((pos + a) * lag_r, 1);
            return joint_return_moment(cache, std::move(lags), lag_r);
        };
        sum += pair_moment(0);
        sum -= a_tilde(0) * (a > 0 ? cache.marginal_g_moment(1, lag_r) : 1.0);
        for (int j = 1; j <= q; ++j) sum -= a_tilde(j) * pair_moment(-j);
        out(a) = static_cast<double>(sum);
    }
    return out;
}

/// Cross-moment matrix E( H^v(theta) H^{v+lag_k}(theta)^T ), exact, via the
/// transfer-operator chain (joint return moments of total order <= 4).
inline Eigen::MatrixXd h_cross_moment(const MomentCache& cache, int q, double lag_r,
                                      const Eigen::VectorXd& a_tilde, int lag_k) {
    if (lag_k < 0) throw std::invalid_argument("h_cross_moment: lag_k must be >= 0");
    const detail_pbef::TransferOps ops(cache, lag_r);
    return detail_pbef::HBlockBuilder(ops, q, a_tilde, lag_k).build();
}

/// M_K = E(H H^T) + sum_{k=1..K} ( E(H^v H^{v+k,T}) + transpose ), symmetrized.
/// K = 0 is the lag-0 approximation M_0.
inline Eigen::MatrixXd m_matrix(const MomentCache& cache, int q, double lag_r,
                                const Eigen::VectorXd& a_tilde, int truncation_K) {
    if (truncation_K < 0) throw std::invalid_argument("m_matrix: truncation_K must be >= 0");
    const detail_pbef::TransferOps ops(cache, lag_r);
    Eigen::MatrixXd M = detail_pbef::HBlockBuilder(ops, q, a_tilde, 0).build();
    for (int k = 1; k <= truncation_K; ++k) {
        const Eigen::MatrixXd G = detail_pbef::HBlockBuilder(ops, q, a_tilde, k).build();
        M += G + G.transpose();
    }
    M = 0.5 * (M + M.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (!(es.eigenvalues().minCoeff() > 0.0))
        throw numeric_error("m_matrix: M not PD; increase K or check theta");
    return M;
}

/// Optimal PBEF weights W* = (d_theta a_tilde^T) C_tilde M_K^{-1}, 3 x (q+1).
inline Eigen::MatrixXd optimal_weights(const LevyModel& model, const MomentCache& cache, int q,
                                       double lag_r, int truncation_K) {
    const PredictorCoeffs pc = predictor_coeffs(cache, q, lag_r);
    const Eigen::MatrixXd A = d_a_tilde(model, cache.theta(), q, lag_r);
    const Eigen::MatrixXd M = m_matrix(cache, q, lag_r, pc.a_tilde, truncation_K);
    return A.transpose() * pc.C_tilde * M.ldlt().solve(Eigen::MatrixXd::Identity(q + 1, q + 1));
}

enum class Method { MSPE, OPBE };

/// Asymptotic covariance V(theta) of sqrt(n)(theta_hat - theta), by the
/// sandwich V = D^{-1} W M W^T D^{-T} with D = -W C_tilde (d a_tilde).
/// The weights are W = (d a_tilde)^T for MSPE and W = A^T C_tilde M_Kw^{-1}
/// for OPBE (Kw = weight_K; 0 gives the lag-0 approximate weighting). The
/// long-run M in the variance is truncated at variance_K, which should be
/// large enough for the tail to be negligible. When weight_K == variance_K
/// the OPBE sandwich reduces to (A^T C_tilde M^{-1} C_tilde A)^{-1}.
inline Eigen::Matrix3d asymptotic_variance(const LevyModel& model, const Theta& theta, int q,
                                           double lag_r, Method method, int weight_K,
                                           int variance_K = 400) {
    MomentCache cache(model, theta, 4);
    const PredictorCoeffs pc = predictor_coeffs(cache, q, lag_r);
    const Eigen::MatrixXd A = d_a_tilde(model, theta, q, lag_r);
    const Eigen::MatrixXd M = m_matrix(cache, q, lag_r, pc.a_tilde, variance_K);

    Eigen::MatrixXd W;
    if (method == Method::MSPE) {
        W = A.transpose();
    } else {
        const Eigen::MatrixXd Mw =
            weight_K == variance_K ? M : m_matrix(cache, q, lag_r, pc.a_tilde, weight_K);
        W = A.transpose() * pc.C_tilde *
            Mw.ldlt().solve(Eigen::MatrixXd::Identity(q + 1, q + 1));
    }

    const Eigen::Matrix3d D = -(W * pc.C_tilde * A);
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(D);
    if (svd.singularValues()(2) < 1e-12 * svd.singularValues()(0))
        throw numeric_error("asymptotic_variance: identifiability failure at theta");
    const Eigen::Matrix3d Dinv = D.inverse();
    return Dinv * (W * M * W.transpose()) * Dinv.transpose();
}

} // namespace cogarch

#endif
