"""Reference values produced by ``tests/oracles/independent.py``, frozen."""

NOMINAL_DESK = (-6.9005, -41.5)
FAULTY_HALF_DX2 = -41.5
OBSERVER_DESK = (-4.9005, -31.0)
SMC_EXAMPLE = 1.4084507042253522
PHI_LOG_70_40 = 0.42857142857142855
RAMP_MID = 0.3
TABLE_REF = (542.5, 0.05)
RHO = 0.8660254037844386
SETTLING_EXP = 6.931471805599453
PID_ONE_SECOND = 97.5
GAIN_THRESHOLD = 1.3
PINNED_FORWARD = 0.41052639295551535
PINNED_PHYSICS = 110.0674475427076
PINNED_TOTAL = 110.0685630427076
UUB_STANDARD = (3487.481338720667, 152031.57609906117, 0.0125)
RK4_EXP_STEP = 0.9048375

PINNED_W1 = [[0.1, -0.2], [0.3, 0.05], [-0.4, 0.25]]
PINNED_B1 = [0.01, -0.02]
PINNED_W2 = [0.7, -0.5]
PINNED_B2 = 0.1
# (t, x1, xhat2, u, d2, d4, d5, d6)
PINNED_WINDOW = [
    (0.0, 541.0, 530.0, 0.40, 10.0, 560.0, 40.0, 0.0),
    (0.1, 540.8, 530.9, 0.45, 10.0, 560.0, 40.0, 0.0),
    (0.2, 540.5, 531.5, 0.50, 10.0, 560.5, 40.0, 5.0),
    (0.3, 540.1, 531.8, 0.30, 10.0, 561.0, 40.0, 5.0),
]
