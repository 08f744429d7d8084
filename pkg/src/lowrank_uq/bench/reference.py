"""Published (mean, std) values used as comparison columns in reproduced tables.

Keys are ``(r, p, tau)``; values map ``(estimator, metric)`` to ``(mean, std)``
over 50 replicates.
"""

from __future__ import annotations

import math

EST = ("als", "db", "f_bayes", "bayes")
UQ_EST = ("db", "f_bayes", "bayes")

_T1_MSE = {
    (2, 100, 0.2): [(0.808, 0.012), (0.051, 0.004), (0.051, 0.003), (0.051, 0.003)],
    (5, 100, 0.2): [(0.828, 0.013), (0.130, 0.005), (0.130, 0.006), (0.130, 0.006)],
    (2, 100, 0.5): [(0.548, 0.011), (0.088, 0.007), (0.088, 0.007), (0.089, 0.007)],
    (5, 100, 0.5): [(0.632, 0.014), (0.233, 0.012), (0.235, 0.012), (0.238, 0.012)],
    (2, 100, 0.8): [(0.695, 0.784), (0.545, 0.805), (0.286, 0.027), (0.294, 0.028)],
    (5, 100, 0.8): [(3.999, 0.900), (3.755, 0.912), (1.083, 0.085), (1.417, 0.228)],
    (2, 1000, 0.2): [(0.806, 0.004), (0.028, 0.001), (0.028, 0.001), (0.028, 0.001)],
    (5, 1000, 0.2): [(0.816, 0.005), (0.070, 0.001), (0.070, 0.001), (0.070, 0.001)],
    (2, 1000, 0.5): [(0.523, 0.004), (0.046, 0.001), (0.046, 0.001), (0.046, 0.001)],
    (5, 1000, 0.5): [(0.564, 0.004), (0.119, 0.002), (0.120, 0.002), (0.120, 0.002)],
    (2, 1000, 0.8): [(0.312, 0.005), (0.133, 0.004), (0.134, 0.004), (0.134, 0.004)],
    (5, 1000, 0.8): [(0.580, 0.156), (0.435, 0.161), (0.404, 0.012), (0.406, 0.012)],
}

_T2_MSE = {
    (2, 100, 0.2): [(0.915, 0.012), (0.539, 0.017), (0.538, 0.017), (0.537, 0.017)],
    (5, 100, 0.2): [(0.944, 0.014), (0.593, 0.015), (0.592, 0.015), (0.592, 0.015)],
    (2, 100, 0.5): [(0.822, 0.016), (0.593, 0.018), (0.588, 0.016), (0.587, 0.017)],
    (5, 100, 0.5): [(0.956, 0.021), (0.760, 0.023), (0.742, 0.022), (0.743, 0.022)],
    (2, 100, 0.8): [(1.344, 0.872), (1.275, 0.887), (0.842, 0.035), (0.846, 0.034)],
    (5, 100, 0.8): [(4.747, 1.044), (4.603, 1.064), (1.724, 0.084), (1.854, 0.193)],
    (2, 1000, 0.2): [(0.909, 0.004), (0.522, 0.012), (0.522, 0.012), (0.501, 0.009)],
    (5, 1000, 0.2): [(0.923, 0.005), (0.552, 0.011), (0.552, 0.010), (0.525, 0.009)],
    (2, 1000, 0.5): [(0.785, 0.005), (0.547, 0.010), (0.546, 0.010), (0.545, 0.010)],
    (5, 1000, 0.5): [(0.847, 0.008), (0.624, 0.012), (0.622, 0.012), (0.619, 0.012)],
    (2, 1000, 0.8): [(0.767, 0.014), (0.678, 0.015), (0.663, 0.015), (0.662, 0.015)],
    (5, 1000, 0.8): [(1.140, 0.018), (1.068, 0.019), (0.992, 0.020), (0.992, 0.020)],
}

# interval lengths (db, f_bayes, bayes) then MSE (db, f_bayes, bayes)
_T3 = {
    (2, 100, 0.2): [(0.811, 0.035), (1.028, 0.055), (1.040, 0.086), (0.051, 0.003), (0.051, 0.003), (0.051, 0.003)],
    (2, 100, 0.5): [(1.521, 0.062), (2.430, 0.226), (2.456, 0.266), (0.088, 0.006), (0.088, 0.007), (0.089, 0.008)],
    (2, 100, 0.8): [(1.271, 0.124), (3.418, 0.589), (3.432, 0.579), (0.498, 0.664), (0.290, 0.028), (0.295, 0.030)],
    (2, 1000, 0.2): [(0.567, 0.013), (0.708, 0.045), (0.733, 0.046), (0.028, 0.001), (0.028, 0.001), (0.028, 0.001)],
    (2, 1000, 0.5): [(0.542, 0.019), (0.860, 0.092), (0.866, 0.083), (0.046, 0.001), (0.046, 0.001), (0.046, 0.001)],
    (2, 1000, 0.8): [(0.310, 0.027), (0.821, 0.160), (0.832, 0.145), (0.364, 0.977), (0.137, 0.004), (0.137, 0.005)],
    (5, 100, 0.2): [(1.215, 0.043), (2.113, 0.144), (1.521, 0.101), (0.128, 0.006), (0.155, 0.007), (0.128, 0.006)],
    (5, 100, 0.5): [(1.124, 0.081), (1.890, 0.175), (1.907, 0.171), (0.234, 0.012), (0.239, 0.012), (0.235, 0.013)],
    (5, 100, 0.8): [(1.032, 0.301), (3.285, 0.515), (2.914, 0.495), (2.768, 1.407), (1.799, 0.117), (1.490, 0.156)],
    (5, 1000, 0.2): [(0.856, 0.011), (1.525, 0.079), (1.118, 0.065), (0.070, 0.002), (0.077, 0.002), (0.070, 0.001)],
    (5, 1000, 0.5): [(1.231, 0.021), (2.763, 0.248), (2.016, 0.186), (0.120, 0.003), (0.148, 0.003), (0.120, 0.003)],
    (5, 1000, 0.8): [(0.927, 0.052), (2.748, 0.533), (2.742, 0.505), (0.418, 0.011), (0.418, 0.011), (0.411, 0.011)],
}

_T4 = {
    (2, 100, 0.2): [(0.530, 0.041), (0.691, 0.070), (0.707, 0.068), (0.554, 0.004), (0.553, 0.004), (0.552, 0.004)],
    (2, 100, 0.5): [(1.220, 0.074), (2.009, 0.206), (2.023, 0.191), (0.575, 0.009), (0.569, 0.008), (0.569, 0.008)],
    (2, 100, 0.8): [(0.859, 0.142), (2.338, 0.496), (2.359, 0.499), (1.116, 0.685), (0.830, 0.029), (0.835, 0.030)],
    (2, 1000, 0.2): [(0.831, 0.015), (1.054, 0.065), (1.100, 0.078), (0.502, 0.001), (0.501, 0.001), (0.489, 0.005)],
    (2, 1000, 0.5): [(0.502, 0.022), (0.814, 0.083), (0.824, 0.083), (0.559, 0.002), (0.558, 0.002), (0.557, 0.002)],
    (2, 1000, 0.8): [(0.183, 0.022), (0.519, 0.117), (0.560, 0.113), (0.673, 0.006), (0.659, 0.006), (0.659, 0.006)],
    (5, 100, 0.2): [(1.143, 0.039), (2.006, 0.103), (1.462, 0.084), (0.617, 0.007), (0.641, 0.009), (0.614, 0.008)],
    (5, 100, 0.5): [(1.244, 0.070), (2.790, 0.268), (2.070, 0.243), (0.749, 0.019), (0.812, 0.020), (0.735, 0.017)],
    (5, 100, 0.8): [(1.771, 0.503), (5.461, 1.137), (5.415, 1.115), (4.946, 0.819), (2.434, 0.129), (1.984, 0.269)],
    (5, 1000, 0.2): [(0.976, 0.015), (1.759, 0.107), (1.338, 0.090), (0.539, 0.001), (0.547, 0.002), (0.518, 0.006)],
    (5, 1000, 0.5): [(0.684, 0.015), (1.555, 0.126), (1.140, 0.096), (0.619, 0.003), (0.636, 0.003), (0.614, 0.004)],
    (5, 1000, 0.8): [(0.915, 0.035), (3.312, 0.563), (2.590, 0.635), (1.098, 0.207), (1.156, 0.016), (0.995, 0.012)],
}


def _mse_table(raw):
    return {cell: {(e, "MSE"): v for e, v in zip(EST, vals)} for cell, vals in raw.items()}


def _uq_table(raw):
    out = {}
    for cell, vals in raw.items():
        d = {(e, "CI_length"): v for e, v in zip(UQ_EST, vals[:3])}
        d.update({(e, "MSE"): v for e, v in zip(UQ_EST, vals[3:])})
        out[cell] = d
    return out


PUBLISHED = {
    "T1": _mse_table(_T1_MSE),
    "T2": _mse_table(_T2_MSE),
    "T3": _uq_table(_T3),
    "T4": _uq_table(_T4),
}


def published_value(table_id: str, r: int, p: int, tau: float, estimator: str, metric: str):
    """Published ``(mean, std)`` or ``None`` when the table does not report it."""
    return PUBLISHED[table_id].get((r, p, round(tau, 2)), {}).get((estimator, metric))


def desk_band(mean: float, std: float, replicates: int = 20, ref_replicates: int = 50) -> tuple[float, float]:
    """Tolerance band ``mean +/- max(3 std sqrt(50 / reps), 0.1 mean)``."""
    half = max(3 * std * math.sqrt(ref_replicates / replicates), 0.1 * abs(mean))
    return mean - half, mean + half
