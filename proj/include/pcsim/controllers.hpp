#pragma once

#include "pcsim/common.hpp"
#include "pcsim/graph.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pcsim {

enum class ControllerVariant {
    IntegralLaplacian,        // u' = -M^T L M y, state u
    KrasovskiiWeighted,       // same law, allows partial consensus
    KrasovskiiExtended,       // rho' = -rho + y, u' = -M^T L M y + K (rho - y)
    ShiftedXi,                // xi' = E^T M y, u = -M^T E xi
    ShiftedXiDamped,          // u = -M^T E (xi + G E^T M y)
    ShiftedXiDampedFiltered,  // u = -M^T E (xi + G E^T M y) - K rho, rho' = -rho + y
};

enum class UBarMode {
    None,
    Constant,           // u += u_bar_value
    VoltageRegulating,  // u += v_ref 1 + R y  (y = phi ./ L)
};

std::string_view variant_name(ControllerVariant v);
ControllerVariant parse_variant(std::string_view name);
std::string_view ubar_mode_name(UBarMode m);
UBarMode parse_ubar_mode(std::string_view name);

bool is_integral_form(ControllerVariant v);
bool is_xi_form(ControllerVariant v);
bool has_filter(ControllerVariant v);
bool has_damping(ControllerVariant v);

struct ControllerSpec {
    ControllerVariant variant = ControllerVariant::ShiftedXi;
    Mat M;  // nu x nu, may be singular
    Mat K;  // nu x nu, symmetric PD (filtered/extended variants)
    Mat G;  // N x N, symmetric PD (damped variants)
    UBarMode u_bar_mode = UBarMode::None;
    Vec u_bar_value;  // Constant mode
    double v_ref = 380.0;
    std::vector<Index> consensus_subset;  // empty: all nodes

    /// M = 100 I, K = 0.2 I, G = I_N, voltage-regulating u_bar at 380 V.
    static ControllerSpec microgrid_defaults(ControllerVariant variant, Index nu, Index channels);
};

/// A controller law written as the linear system
///   s' = Ac s + Bc y,   u = Cu s + Du y + c,
/// which covers all six variants together with the u_bar term.
/// State layout: [u_int (nu)] [xi (N)] [rho (nu)], only the blocks the variant uses.
class Controller {
public:
    /// `plant_r` is the per-node filter resistance used by the voltage-regulating u_bar;
    /// it may be empty for other modes.
    Controller(ControllerSpec spec, const std::vector<Edge>& comm_edges, Index nu, Vec plant_r = {});
    Controller(ControllerSpec spec, LaplacianFactor factor, Vec plant_r = {});

    const ControllerSpec& spec() const noexcept { return spec_; }
    ControllerVariant variant() const noexcept { return spec_.variant; }
    Index nu() const noexcept { return nu_; }
    Index channels() const noexcept { return factor_.channels(); }
    Index state_dim() const noexcept { return dim_; }

    /// Offsets into the controller state, -1 when the block is absent.
    Index u_offset() const noexcept { return u_off_; }
    Index xi_offset() const noexcept { return xi_off_; }
    Index rho_offset() const noexcept { return rho_off_; }

    /// Laplacian and factor actually used (subset-embedded for partial consensus).
    const LaplacianFactor& factor() const noexcept { return factor_; }
    /// Effective output weight (rows/columns outside the subset zeroed).
    const Mat& weight() const noexcept { return m_eff_; }
    /// M^T L M.
    const Mat& coupling() const noexcept { return w_l_; }
    /// E^T M.
    const Mat& edge_weight() const noexcept { return etm_; }
    /// State-feedback part of u_bar (diag(R) for voltage regulation, else zero).
    const Vec& ubar_feedback() const noexcept { return ubar_f_; }
    /// Constant part of u_bar.
    const Vec& ubar_constant() const noexcept { return ubar_c_; }

    const Mat& Ac() const noexcept { return ac_; }
    const Mat& Bc() const noexcept { return bc_; }
    const Mat& Cu() const noexcept { return cu_; }
    const Mat& Du() const noexcept { return du_; }

    void output(const Vec& s, const Vec& y, Vec& u) const;
    Vec output(const Vec& s, const Vec& y) const;
    void derivative(const Vec& s, const Vec& y, Vec& ds) const;
    Vec derivative(const Vec& s, const Vec& y) const;
    /// du/dt given ds/dt and dy/dt.
    void output_rate(const Vec& ds, const Vec& dy, Vec& du) const;
    Vec output_rate(const Vec& ds, const Vec& dy) const;

    /// Controller state at an output consensus y (rho = y, xi = xi_or_zero, u_int = 0).
    Vec consensus_state(const Vec& y) const;

    /// Rows w with w^T [Ac Bc] = 0: linear functionals of s conserved by the controller
    /// for every output signal. Returned as a (k x state_dim) matrix.
    Mat conserved_functionals() const;

    /// M-weighted consensus error: max pairwise spread of M y over the consensus nodes,
    /// scaled by the largest |M| entry so it reads in output units.
    double consensus_error(const Vec& y) const;

private:
    void build();

    ControllerSpec spec_;
    LaplacianFactor factor_;
    Vec plant_r_;
    Index nu_ = 0;
    Index dim_ = 0;
    Index u_off_ = -1, xi_off_ = -1, rho_off_ = -1;
    Mat m_eff_, w_l_, etm_;
    Vec ubar_f_, ubar_c_;
    Mat ac_, bc_, cu_, du_;
    std::vector<Index> consensus_nodes_;
    double weight_scale_ = 1.0;
};

}  // namespace pcsim
