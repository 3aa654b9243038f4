"""Closed-form continuous-time prediction for the shipped jaywalking scenario.

The car cruises, starts braking at 8 m/s^2 a reaction delay after the
pedestrian is first seen inside its corridor and within perception range,
and collides iff its footprint spans the pedestrian's crossing line while
the pedestrian is inside the car's lane band.
"""

import math

A_BRAKE = 8.0


def predicts_collision(ped_speed, trigger, **kw):
    lo, hi = collision_window(ped_speed, trigger, **kw)
    return lo < hi


def collision_window(ped_speed, trigger, *, cruise=15.0, perception=40.0, delay=0.6, dt=0.05,
                     car_x0=20.0, car_y=-1.75, car_len=4.5, car_w=1.8,
                     ped_x=100.0, ped_y0=4.5, ped_y1=-4.5, ped_size=0.5, margin=0.25, walk_shift=0.0):
    """Time interval during which the footprints overlap (empty if lo >= hi).

    ``walk_shift`` delays the pedestrian's start, for probing tick jitter."""
    lateral = abs(ped_y0 - car_y)
    if trigger <= lateral:
        return math.inf, math.inf
    x_trig = ped_x - math.sqrt(trigger ** 2 - lateral ** 2)
    if x_trig <= car_x0:
        t_trig = 0.0
    else:
        t_trig = (x_trig - car_x0) / cruise
    # the behaviour stream moves the pedestrian one tick after the trigger
    t_walk = t_trig + dt + walk_shift

    def t_at_y(y):
        return t_walk + (ped_y0 - y) / ped_speed

    band = car_w / 2 + ped_size / 2
    corridor = band + margin
    z_in, z_out = t_at_y(car_y + band), t_at_y(car_y - band)
    c_in, c_out = t_at_y(car_y + corridor), t_at_y(car_y - corridor)

    # detection: in corridor and bumper gap below the perception range
    def gap(t):
        return ped_x - (car_x0 + cruise * t) - car_len / 2 - ped_size / 2

    t_range = (ped_x - car_len / 2 - ped_size / 2 - perception - car_x0) / cruise
    t_det = max(c_in, t_range)
    braking = t_det < c_out and gap(t_det) > 0
    t_brake = t_det + delay if braking else math.inf

    def x_car(t):
        if t <= t_brake:
            return car_x0 + cruise * t
        tb = min(t - t_brake, cruise / A_BRAKE)
        return car_x0 + cruise * t_brake + cruise * tb - 0.5 * A_BRAKE * tb * tb

    def first_time_beyond(x):
        # car position is non-decreasing; bisection on [0, horizon]
        lo, hi = 0.0, 60.0
        if x_car(hi) <= x:
            return math.inf
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if x_car(mid) > x:
                hi = mid
            else:
                lo = mid
        return hi

    reach = car_len / 2 + ped_size / 2
    t_front = first_time_beyond(ped_x - reach)
    t_back = first_time_beyond(ped_x + reach)
    return max(t_front, z_in), min(t_back, z_out)
