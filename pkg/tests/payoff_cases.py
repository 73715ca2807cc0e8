"""Shared payoff-language cases (unit tests and the acceptance run)."""

ROUND_TRIP = [
    "B",
    "B^2",
    "-B^2",
    "max(B - 1, 0)",
    "max(B-1,0)",
    "min(B, 2) + 1",
    "QV >= 2",
    "QV_at(1) >= 2.25",
    "AHAT_at(2) = 4",
    "B_at(0) + B_at(1) * 2",
    "abs(B) / STEPS",
    "exp(-B) - 1",
    "ind(QV > 1) * B",
    "neg(MAXB)",
    "2 ^ 3 ^ 2",
    "(2 ^ 3) ^ 2",
    "1 - 2 - 3",
    "1 - (2 - 3)",
    "8 / 4 / 2",
    "--B",
    "-(B + 1) * -2",
    "B < 1 <= 2",
    "B ≤ 1",
    "QV ≥ 2 * DT",
    "inf",
    "ninf + B",
    "1.5e-3 * B",
    ".5 * QV",
    "max(min(B, 1), neg(1)) ^ 2",
    "(B > 0) + (B < 0) * 2 - (B == 0)",
]

# (source, error class name, byte offset)
ERRORS = [
    ("B + ", "PayoffSyntaxError", 4),
    ("max(B) + foo", "ArityError", 0),
    ("B + bogus(1)", "UnknownIdentifier", 4),
]
