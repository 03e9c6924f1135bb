"""Two independent curvature pipelines and the ASD null-Kahler checkers.

Oracle path: Christoffel symbols -> Riemann -> Ricci/scalar/Weyl in
coordinates, then projection onto the Sigma basis and the dual frame to
produce spinor-labelled components.

Cartan path: spin connection from the first structure equations (a 24x24
linear solve per point, differentiated implicitly for exactness),
curvature two-forms R = dGamma + Gamma ^ Gamma, then expansion in the
Sigma basis.

The two paths use different factor conventions.  Rather than chasing
those factors analytically, the finitely many proportionality constants
between the paths were determined once on two designated fixtures and
frozen below (``KAPPA``); every fixture must then agree, which turns the
sign/factor ambiguity into a testable contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    CoFrame,
    DegeneracyError,
    MetricField,
    exterior_derivative,
)
from .spinors import EPS_LOWER, EPS_UPPER, SYM_PAIRS

#: strictly increasing coordinate index pairs for two-form components
PAIRS6 = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

#: slots of a totally symmetric rank-4 spinor, by number of 1-indices
WEYL_SLOTS = ((0, 0, 0, 0), (0, 0, 0, 1), (0, 0, 1, 1), (0, 1, 1, 1), (1, 1, 1, 1))

def _soldered_sigma() -> tuple:
    """Sigma bases in bispinor slots: universal constant arrays.

    e^{EA'}_mu D^mu_{CC'} = delta^E_C delta^{A'}_{C'} makes the soldered
    Sigma coframe-independent:
    Sigma^{EF}[CC'DD'] = 1/2 eps_{C'D'} (d^E_C d^F_D + d^E_D d^F_C),
    and the primed mirror.  Index layout: [E, F, C, C', D, D'].
    """
    delta = np.eye(2)
    sig_u = 0.5 * (
        np.einsum("pr,ec,fd->efcpdr", EPS_LOWER, delta, delta)
        + np.einsum("pr,ed,fc->efcpdr", EPS_LOWER, delta, delta)
    )
    sig_p = 0.5 * (
        np.einsum("cd,ep,fr->efcpdr", EPS_LOWER, delta, delta)
        + np.einsum("cd,er,fp->efcpdr", EPS_LOWER, delta, delta)
    )
    return sig_u, sig_p


_SIG_U_SOLD, _SIG_P_SOLD = _soldered_sigma()


def _sym4_basis(slot) -> np.ndarray:
    t = np.zeros((2, 2, 2, 2))
    from itertools import permutations as _perms

    for perm in set(_perms(slot)):
        t[perm] = 1.0
    return t


def _phi_basis(u_pair, p_pair) -> np.ndarray:
    t = np.zeros((2, 2, 2, 2))
    for (a, b) in {u_pair, u_pair[::-1]}:
        for (c, d) in {p_pair, p_pair[::-1]}:
            t[a, b, c, d] = 1.0
    return t


def _model_unprimed(c_asd, phi, r_scalar) -> np.ndarray:
    """Soldered R^A_B from (C_{ABCD}, Phi, R), all lower-index inputs."""
    c_up = np.einsum("ae,ebcd->abcd", EPS_UPPER, c_asd)  # C^A_{BCD}
    term_c = np.einsum("abcd,cdCPDR->abCPDR", c_up, _SIG_U_SOLD)
    sig_mixed = np.einsum("acCPDR,cb->abCPDR", _SIG_U_SOLD, EPS_LOWER)
    term_r = (r_scalar / 12.0) * sig_mixed
    phi_up = np.einsum("ae,ebcd->abcd", EPS_UPPER, phi)  # Phi^A_{B C'D'}
    term_phi = np.einsum("abcd,cdCPDR->abCPDR", phi_up, _SIG_P_SOLD)
    return term_c + term_r + term_phi


def _model_primed(c_sd, phi, r_scalar) -> np.ndarray:
    """Soldered R^{A'}_{B'}; shares Phi and R with the unprimed block."""
    c_up = np.einsum("ae,ebcd->abcd", EPS_UPPER, c_sd)
    term_c = np.einsum("abcd,cdCPDR->abCPDR", c_up, _SIG_P_SOLD)
    sig_mixed = np.einsum("acCPDR,cb->abCPDR", _SIG_P_SOLD, EPS_LOWER)
    term_r = (r_scalar / 12.0) * sig_mixed
    # Phi^{A'}_{B' CD}: phi stored as [C, D, E', B']
    phi_up = np.einsum("ae,cdeb->abcd", EPS_UPPER, phi)
    term_phi = np.einsum("abcd,cdCPDR->abCPDR", phi_up, _SIG_U_SOLD)
    return term_c + term_r + term_phi


def _curvature_model_matrix() -> np.ndarray:
    """Constant 128x20 map (C_asd5, C_sd5, Phi9, R) -> soldered forms."""
    zero4 = np.zeros((2, 2, 2, 2))
    columns = []
    for slot in WEYL_SLOTS:
        columns.append(np.concatenate([
            _model_unprimed(_sym4_basis(slot), zero4, 0.0).ravel(),
            np.zeros(64),
        ]))
    for slot in WEYL_SLOTS:
        columns.append(np.concatenate([
            np.zeros(64),
            _model_primed(_sym4_basis(slot), zero4, 0.0).ravel(),
        ]))
    for u_pair in SYM_PAIRS:
        for p_pair in SYM_PAIRS:
            phi = _phi_basis(u_pair, p_pair)
            columns.append(np.concatenate([
                _model_unprimed(zero4, phi, 0.0).ravel(),
                _model_primed(zero4, phi, 0.0).ravel(),
            ]))
    columns.append(np.concatenate([
        _model_unprimed(zero4, zero4, 1.0).ravel(),
        _model_primed(zero4, zero4, 1.0).ravel(),
    ]))
    return np.stack(columns, axis=-1)


_MODEL_M = _curvature_model_matrix()
_MODEL_PINV = np.linalg.pinv(_MODEL_M)

# Frozen path-conversion constants (oracle units per cartan units),
# calibrated once on the theta = x*y^3 and theta = x^2*y^2 fixtures and
# clean rationals there; every other fixture must reproduce them.
KAPPA = {
    "asd_weyl": -1.0,
    "sd_weyl": -1.0,
    "phi": 2.0,
    "scalar": -1.0,
}

# Frozen closed-form anchors on the same two fixtures: the oracle ASD
# component per delta^4(theta) with delta_0 = d/dy, delta_1 = -d/dx, and
# the oracle SD component (slot 0'0'0'0') per box(f).
KAPPA_PAPER = {"asd": 2.0, "sd": 0.5}


@dataclass
class RawCurvature:
    """Coordinate-oracle curvature at a batch of points."""

    riemann: np.ndarray     # R^a_{bcd}
    riemann_low: np.ndarray  # R_{abcd}
    ricci: np.ndarray       # R_{ab}
    scalar: np.ndarray      # R
    weyl_low: np.ndarray    # C_{abcd}
    metric: np.ndarray
    metric_inv: np.ndarray

    def ricci_square(self) -> np.ndarray:
        """Ric_ab Ric^ab at each point."""
        up = np.einsum("nac,nbd,ncd->nab", self.metric_inv, self.metric_inv,
                       self.ricci)
        return np.einsum("nab,nab->n", self.ricci, up)


@dataclass
class CurvatureReport:
    """Spinor-labelled curvature components at a batch of points.

    ``c_asd``/``c_sd`` hold the five independent components of the
    anti-self-dual / self-dual Weyl spinors (all indices lowered, ordered
    by the number of 1-indices); ``phi`` is the 3x3 trace-free Ricci
    block indexed by (unprimed pair, primed pair).
    """

    c_asd: np.ndarray
    c_sd: np.ndarray
    phi: np.ndarray
    scalar: np.ndarray
    fit_residual: float
    path: str

    def max_sd(self) -> float:
        return float(np.max(np.abs(self.c_sd)))

    def max_asd(self) -> float:
        return float(np.max(np.abs(self.c_asd)))

    def to_dict(self) -> dict:
        """JSON-ready view: named component maxima plus the residual."""
        components = {}
        for k in range(5):
            components[f"c_asd_{k}"] = float(np.max(np.abs(self.c_asd[:, k])))
            components[f"c_sd_{k}"] = float(np.max(np.abs(self.c_sd[:, k])))
        for u, (a, b) in enumerate(SYM_PAIRS):
            for v, (c, d) in enumerate(SYM_PAIRS):
                components[f"phi_{a}{b}_{c}{d}"] = float(
                    np.max(np.abs(self.phi[:, u, v])))
        components["scalar"] = float(np.max(np.abs(self.scalar)))
        return {
            "path": self.path,
            "components": components,
            "residual_summary": {
                "max_sd": self.max_sd(),
                "max_asd": self.max_asd(),
                "fit_residual": self.fit_residual,
            },
        }


# --- coordinate oracle --------------------------------------------------------

def christoffel(gv, dg, ginv) -> np.ndarray:
    """Gamma^a_{bc} = 1/2 g^{ad} (d_b g_dc + d_c g_bd - d_d g_bc)."""
    bracket = (
        np.einsum("nbdc->nbcd", dg)
        + np.einsum("ncbd->nbcd", dg)
        - np.einsum("ndbc->nbcd", dg)
    )
    return 0.5 * np.einsum("nad,nbcd->nabc", ginv, bracket)


def christoffel_derivatives(gv, dg, ddg, ginv) -> np.ndarray:
    """d_k Gamma^a_{bc}, exact given exact metric derivatives."""
    dginv = -np.einsum("nae,nkef,nfd->nkad", ginv, dg, ginv)
    bracket = (
        np.einsum("nbdc->nbcd", dg)
        + np.einsum("ncbd->nbcd", dg)
        - np.einsum("ndbc->nbcd", dg)
    )
    dbracket = (
        np.einsum("nkbdc->nkbcd", ddg)
        + np.einsum("nkcbd->nkbcd", ddg)
        - np.einsum("nkdbc->nkbcd", ddg)
    )
    return 0.5 * (
        np.einsum("nkad,nbcd->nkabc", dginv, bracket)
        + np.einsum("nad,nkbcd->nkabc", ginv, dbracket)
    )


def riemann_from_christoffel(gamma, dgamma) -> np.ndarray:
    """R^a_{bcd} = d_c Gamma^a_{db} - d_d Gamma^a_{cb} + Gamma Gamma terms."""
    return (
        np.einsum("ncadb->nabcd", dgamma)
        - np.einsum("ndacb->nabcd", dgamma)
        + np.einsum("nace,nedb->nabcd", gamma, gamma)
        - np.einsum("nade,necb->nabcd", gamma, gamma)
    )


def coordinate_curvature(metric: MetricField, points) -> RawCurvature:
    """Independent curvature oracle from coordinate formulas."""
    gv = metric.evaluate(points)
    ginv = metric.inverse(points)
    dg = metric.first_derivatives(points)
    ddg = metric.second_derivatives(points)
    gamma = christoffel(gv, dg, ginv)
    dgamma = christoffel_derivatives(gv, dg, ddg, ginv)
    riem = riemann_from_christoffel(gamma, dgamma)
    riem_low = np.einsum("nae,nebcd->nabcd", gv, riem)
    ricci = np.einsum("nabad->nbd", riem)
    scalar = np.einsum("nbd,nbd->n", ginv, ricci)
    n = gv.shape[-1]
    if n == 4:
        weyl = _weyl_from_riemann(riem_low, ricci, scalar, gv)
    else:
        weyl = np.zeros_like(riem_low)
    return RawCurvature(riem, riem_low, ricci, scalar, weyl, gv, ginv)


def _weyl_from_riemann(riem_low, ricci, scalar, gv) -> np.ndarray:
    """4D Weyl tensor C_{abcd} (fully trace-free part of Riemann)."""
    g = gv
    term_ricci = 0.5 * (
        np.einsum("nac,ndb->nabcd", g, ricci)
        - np.einsum("nad,ncb->nabcd", g, ricci)
        - np.einsum("nbc,nda->nabcd", g, ricci)
        + np.einsum("nbd,nca->nabcd", g, ricci)
    )
    term_scalar = (
        np.einsum("n,nac,ndb->nabcd", scalar / 6.0, g, g)
        - np.einsum("n,nad,ncb->nabcd", scalar / 6.0, g, g)
    )
    return riem_low - term_ricci + term_scalar


# --- cartan path ---------------------------------------------------------------

def _pair_sign_table(dim: int = 4):
    table = {}
    for idx, (mu, nu) in enumerate(PAIRS6):
        table[(mu, nu)] = (idx, 1.0)
        table[(nu, mu)] = (idx, -1.0)
    return table


_PAIR_INDEX = _pair_sign_table()


def _mixed_coefficients() -> np.ndarray:
    """M[A, B, p]: weight of symmetric unknown Gamma_p in Gamma^A_B."""
    m = np.zeros((2, 2, 3))
    for p, (c, d) in enumerate(SYM_PAIRS):
        for a in range(2):
            for b in range(2):
                if b == d:
                    m[a, b, p] += EPS_UPPER[a, c]
                if c != d and b == c:
                    m[a, b, p] += EPS_UPPER[a, d]
    return m


_MIXED = _mixed_coefficients()


@dataclass
class SpinConnection:
    """Spin-connection one-forms and their exact first derivatives.

    ``unprimed``/``primed`` have shape (n, 3, 4): symmetric-pair index
    then coordinate component; derivative arrays add a leading coordinate
    axis (n, 4, 3, 4).  ``residual`` is the structure-equation residual.
    """

    unprimed: np.ndarray
    primed: np.ndarray
    d_unprimed: np.ndarray
    d_primed: np.ndarray
    residual: float


def _assemble_structure_matrix(e: np.ndarray) -> np.ndarray:
    npts = e.shape[0]
    mat = np.zeros((npts, 24, 24))
    for row, (a, ap, (mu, nu)) in enumerate(_structure_rows()):
        for p in range(3):
            for k in range(4):
                col_u = p * 4 + k
                col_p = 12 + p * 4 + k
                acc_u = np.zeros(npts)
                acc_p = np.zeros(npts)
                for b in range(2):
                    if _MIXED[a, b, p]:
                        acc_u += _MIXED[a, b, p] * (
                            e[:, b, ap, mu] * (k == nu) - e[:, b, ap, nu] * (k == mu)
                        )
                    if _MIXED[ap, b, p]:
                        acc_p += _MIXED[ap, b, p] * (
                            e[:, a, b, mu] * (k == nu) - e[:, a, b, nu] * (k == mu)
                        )
                mat[:, row, col_u] = acc_u
                mat[:, row, col_p] = acc_p
    return mat


def _structure_rows():
    rows = []
    for a in range(2):
        for ap in range(2):
            for pair in PAIRS6:
                rows.append((a, ap, pair))
    return rows


def _structure_rhs(de: np.ndarray) -> np.ndarray:
    npts = de.shape[0]
    rhs = np.empty((npts, 24))
    for row, (a, ap, (mu, nu)) in enumerate(_structure_rows()):
        rhs[:, row] = de[:, mu, a, ap, nu] - de[:, nu, a, ap, mu]
    return rhs


def spin_connection(coframe: CoFrame, points) -> SpinConnection:
    """Solve the first structure equations for Gamma_{AB}, Gamma_{A'B'}.

    de^{AA'} = e^{BA'} ^ Gamma^A_B + e^{AB'} ^ Gamma^{A'}_{B'}; the 24x24
    system is solved per point and differentiated implicitly, so the
    connection and its first derivatives are exact up to round-off.
    """
    e = coframe.evaluate(points)
    de = coframe.first_derivatives(points)
    dde = coframe.second_derivatives(points)
    npts = e.shape[0]
    mat = _assemble_structure_matrix(e)
    rhs = _structure_rhs(de)
    try:
        gamma_flat = np.linalg.solve(mat, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as err:
        raise DegeneracyError(f"singular structure system: {err}") from None
    residual = float(np.max(np.abs(np.einsum("nij,nj->ni", mat, gamma_flat) - rhs)))

    dgamma_flat = np.empty((npts, 4, 24))
    for l in range(4):
        dmat = _assemble_structure_matrix(de[:, l])
        drhs = _structure_rhs(dde[:, l]) - np.einsum("nij,nj->ni", dmat, gamma_flat)
        dgamma_flat[:, l] = np.linalg.solve(mat, drhs[..., None])[..., 0]

    def split(flat):
        shaped = flat.reshape(flat.shape[:-1] + (2, 3, 4))
        return shaped[..., 0, :, :], shaped[..., 1, :, :]

    unprimed, primed = split(gamma_flat)
    d_unprimed, d_primed = split(dgamma_flat)
    return SpinConnection(unprimed, primed, d_unprimed, d_primed, residual)


def _mixed_connection(sym: np.ndarray) -> np.ndarray:
    """Gamma^A_B one-form components from the symmetric-pair storage."""
    return np.einsum("abp,npk->nabk", _MIXED, sym)


def curvature_two_forms(conn: SpinConnection):
    """R^A_B = dGamma^A_B + Gamma^A_C ^ Gamma^C_B (and primed mirror)."""

    def build(sym, dsym):
        mixed = _mixed_connection(sym)
        dmixed = np.einsum("abp,nlpk->nlabk", _MIXED, dsym)
        d_part = np.einsum("nmabk->nabmk", dmixed) - np.einsum(
            "nkabm->nabmk", dmixed
        )
        quad = np.einsum("nacm,ncbk->nabmk", mixed, mixed) - np.einsum(
            "nack,ncbm->nabmk", mixed, mixed
        )
        return d_part + quad

    r_unprimed = build(conn.unprimed, conn.d_unprimed)
    r_primed = build(conn.primed, conn.d_primed)
    return r_unprimed, r_primed


def decompose_curvature(r_unprimed, r_primed, dual_vectors) -> CurvatureReport:
    """Read (C_ABCD, C_A'B'C'D', Phi, R) off the curvature two-forms.

    The forms are soldered into bispinor slots with the dual frame
    (where the Sigma basis becomes a universal constant array) and the
    two-form decomposition is inverted as one overdetermined linear fit:
    128 soldered components against 20 unknowns shared across both
    chirality blocks.  The fit residual is the structural error of the
    decomposition and is reported.
    """
    npts = r_unprimed.shape[0]
    sold_u = np.einsum("nabmk,ncpm,ndrk->nabcpdr", r_unprimed,
                       dual_vectors, dual_vectors)
    sold_p = np.einsum("nabmk,ncpm,ndrk->nabcpdr", r_primed,
                       dual_vectors, dual_vectors)
    data = np.concatenate(
        [sold_u.reshape(npts, 64), sold_p.reshape(npts, 64)], axis=1
    )
    theta = data @ _MODEL_PINV.T
    fit = float(np.max(np.abs(data - theta @ _MODEL_M.T)))
    c_asd = theta[:, :5]
    c_sd = theta[:, 5:10]
    phi = theta[:, 10:19].reshape(npts, 3, 3)
    scalar = theta[:, 19]
    return CurvatureReport(c_asd, c_sd, phi, scalar, fit, path="cartan")


def cartan_report(coframe: CoFrame, points) -> CurvatureReport:
    conn = spin_connection(coframe, points)
    r_u, r_p = curvature_two_forms(conn)
    dual = coframe.dual_vectors(points)
    return decompose_curvature(r_u, r_p, dual)


# --- oracle projections --------------------------------------------------------

def _extract_slots(t: np.ndarray) -> np.ndarray:
    cols = [t[(slice(None),) + slot] for slot in WEYL_SLOTS]
    return np.stack(cols, axis=-1)


def oracle_report(metric: MetricField, coframe: CoFrame, points) -> CurvatureReport:
    """Spinor-labelled components from the coordinate oracle.

    The Weyl tensor is soldered onto spinor slots with the dual frame,
    then split by the exact inversion of the two-form decomposition:
    C_{A'B'C'D'} = 1/4 eps^{AB} eps^{CD} C_{AA'BB'CC'DD'} (mirror for
    the unprimed part).  Everything carries lower spinor labels.
    """
    raw = coordinate_curvature(metric, points)
    dual = coframe.dual_vectors(points)

    weyl_spin = np.einsum("nabcd,nxXa,nyYb,nzZc,nwWd->nxXyYzZwW",
                          raw.weyl_low, dual, dual, dual, dual)
    c_sd_full = 0.25 * np.einsum("nxXyYzZwW,xy,zw->nXYZW", weyl_spin,
                                 EPS_UPPER, EPS_UPPER)
    c_asd_full = 0.25 * np.einsum("nxXyYzZwW,XY,ZW->nxyzw", weyl_spin,
                                  EPS_UPPER, EPS_UPPER)
    c_sd = _extract_slots(c_sd_full)
    c_asd = _extract_slots(c_asd_full)
    # total symmetry of the extracted spinors validates the projection
    sym_gap = max(
        float(np.max(np.abs(c_sd_full - np.einsum("nXYZW->nYXZW", c_sd_full)))),
        float(np.max(np.abs(c_sd_full - np.einsum("nXYZW->nXZYW", c_sd_full)))),
        float(np.max(np.abs(c_asd_full - np.einsum("nxyzw->nyxzw", c_asd_full)))),
        float(np.max(np.abs(c_asd_full - np.einsum("nxyzw->nxzyw", c_asd_full)))),
    )

    phi_ab = raw.ricci - 0.25 * np.einsum("n,nab->nab", raw.scalar, raw.metric)
    phi_bis = np.einsum("nab,nxpa,nyqb->nxpyq", phi_ab, dual, dual)
    # reorder to (unprimed pair, primed pair) with symmetrization
    phi_full = 0.5 * (
        np.einsum("nxpyq->nxypq", phi_bis) + np.einsum("nxpyq->nyxqp", phi_bis)
    )
    pair_of = {(0, 0): 0, (0, 1): 1, (1, 1): 2}
    phi = np.empty((phi_full.shape[0], 3, 3))
    for (a, b), u in pair_of.items():
        for (c, d), v in pair_of.items():
            phi[:, u, v] = phi_full[:, a, b, c, d]

    return CurvatureReport(c_asd, c_sd, phi, raw.scalar, sym_gap, path="oracle")


# --- checks --------------------------------------------------------------------

def check_asd(report_or_coframe, points=None) -> float:
    """Max |C_{A'B'C'D'}| over the sample points."""
    if isinstance(report_or_coframe, CurvatureReport):
        return report_or_coframe.max_sd()
    return cartan_report(report_or_coframe, points).max_sd()


@dataclass
class NullKahlerReport:
    d_sigma00: float
    d_sigma01: float
    ricci_square: float
    max_ricci: float

    def passes(self, tol=1e-8) -> bool:
        return max(self.d_sigma00, self.d_sigma01, self.ricci_square) < tol


def check_null_kahler(coframe: CoFrame, metric: MetricField, points) -> NullKahlerReport:
    """Residuals of the closed-form conditions and Ricci nullness."""
    sig_p, _ = coframe.sigma_fields()
    d00 = float(np.max(np.abs(exterior_derivative(sig_p[0]).evaluate(points))))
    d01 = float(np.max(np.abs(exterior_derivative(sig_p[1]).evaluate(points))))
    raw = coordinate_curvature(metric, points)
    ric2 = float(np.max(np.abs(raw.ricci_square())))
    max_ric = float(np.max(np.abs(raw.ricci)))
    return NullKahlerReport(d00, d01, ric2, max_ric)


def path_agreement(oracle: CurvatureReport, cartan: CurvatureReport) -> dict:
    """Relative disagreement per sector after applying the frozen KAPPA.

    A sector that vanishes at working precision (its magnitude is
    negligible against the report as a whole) is compared absolutely at
    the global curvature scale; a ratio of two round-off floors is
    meaningless.
    """
    global_scale = max(
        np.max(np.abs(oracle.c_asd)), np.max(np.abs(oracle.c_sd)),
        np.max(np.abs(oracle.phi)), np.max(np.abs(oracle.scalar)), 1.0,
    )

    def rel(a, b, kappa):
        gap = float(np.max(np.abs(a - kappa * b)))
        scale = np.max(np.abs(a))
        if scale < 1e-9 * global_scale:
            return gap / global_scale
        return gap / scale

    return {
        "c_asd": rel(oracle.c_asd, cartan.c_asd, KAPPA["asd_weyl"]),
        "c_sd": rel(oracle.c_sd, cartan.c_sd, KAPPA["sd_weyl"]),
        "phi": rel(oracle.phi, cartan.phi, KAPPA["phi"]),
        "scalar": rel(oracle.scalar, cartan.scalar, KAPPA["scalar"]),
    }
