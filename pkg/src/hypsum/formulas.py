"""Formula tags shared by the constants, verification and CLI layers."""

import enum

from .errors import UsageError


class FormulaId(str, enum.Enum):
    RECT_GCD = "rect_gcd"
    HYP_GCD_ID = "gcd_hyp_id"
    RECT_LCM = "rect_lcm"
    RECT_RATIO = "rect_ratio"
    TAU_GCD = "tau_gcd"
    GENERIC_GCD = "generic_gcd"
    RECIP_GCD = "recip_gcd"
    FSETA_GCD = "fseta_gcd"
    LOG_GCD = "log_gcd"
    LOGKAPPA_GCD = "logkappa_gcd"
    OMEGA_GCD = "omega_gcd"
    BIGOMEGA_GCD = "bigomega_gcd"
    LCM_HYP = "lcm_hyp"
    LOG_LCM = "log_lcm"
    OMEGA_LCM = "omega_lcm"
    BIGOMEGA_LCM = "bigomega_lcm"
    TAU_LCM = "tau_lcm"
    RATIO_HYP = "ratio_hyp"
    AUX_2OMEGA = "aux_2omega"
    AUX_TAU = "aux_tau"
    AUX_JORDAN2 = "aux_jordan2"
    AUX_OMEGA = "aux_omega"
    AUX_TAU_LOG = "aux_tau_log"
    AUX_TAU2 = "aux_tau2"

    @property
    def needs_spec(self) -> bool:
        return self in (FormulaId.GENERIC_GCD, FormulaId.FSETA_GCD)

    @property
    def rectangular(self) -> bool:
        return self in (FormulaId.RECT_GCD, FormulaId.RECT_LCM, FormulaId.RECT_RATIO)


_ALIASES = {
    "ratio_rect": FormulaId.RECT_RATIO,
    "gcd_rect": FormulaId.RECT_GCD,
    "lcm_rect": FormulaId.RECT_LCM,
    "id_gcd": FormulaId.HYP_GCD_ID,
    "hyp_gcd_id": FormulaId.HYP_GCD_ID,
    "reciprocal_gcd": FormulaId.RECIP_GCD,
    "log_kappa_gcd": FormulaId.LOGKAPPA_GCD,
    "big_omega_gcd": FormulaId.BIGOMEGA_GCD,
    "big_omega_lcm": FormulaId.BIGOMEGA_LCM,
    "id_lcm": FormulaId.LCM_HYP,
    "two_pow_omega": FormulaId.AUX_2OMEGA,
    "seta_gcd": FormulaId.FSETA_GCD,
}


def parse_formula(text) -> FormulaId:
    if isinstance(text, FormulaId):
        return text
    key = str(text).strip().lower().replace("-", "_")
    if key in _ALIASES:
        return _ALIASES[key]
    try:
        return FormulaId(key)
    except ValueError:
        pass
    try:
        return FormulaId[key.upper()]
    except KeyError:
        known = ", ".join(f.value for f in FormulaId)
        raise UsageError(f"unknown formula {text!r}; known: {known}") from None
