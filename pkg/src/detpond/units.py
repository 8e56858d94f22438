"""Unit conversions, centralized.

Internal canonical units: time in minutes, volume in m^3, flow in m^3/min,
catchment storage in mm, rain intensity in mm/min.  Water level is held as
volume internally and exposed in cm through the pond surface area.
"""

M3_PER_MIN_PER_L_PER_S = 0.06  # 1 L/s = 60 L/min = 0.06 m^3/min


def l_per_s_to_m3_per_min(q):
    return q * M3_PER_MIN_PER_L_PER_S


def m3_per_min_to_l_per_s(q):
    return q / M3_PER_MIN_PER_L_PER_S


def level_cm_to_volume_m3(w_cm, area_m2):
    return (w_cm / 100.0) * area_m2


def volume_m3_to_level_cm(v_m3, area_m2):
    return 100.0 * v_m3 / area_m2


def rain_mm_to_m3(depth_mm, area_m2):
    """Rain depth over a catchment area to a water volume."""
    return depth_mm * 1e-3 * area_m2
