"""Exact rational feasibility via a two-phase-style simplex (phase 1 only, Bland's rule)."""

from __future__ import annotations

from fractions import Fraction


def feasible_point(n_vars, eq_rows=(), eq_rhs=(), ub_rows=(), ub_rhs=()):
    """Find x >= 0 with ``eq_rows @ x == eq_rhs`` and ``ub_rows @ x <= ub_rhs``.

    All data are converted to Fractions. Returns a list of Fractions or None
    when the system is infeasible.
    """
    rows, rhs = [], []
    n_slack = len(ub_rows)
    width = n_vars + n_slack
    for k, (r, b) in enumerate(zip(ub_rows, ub_rhs)):
        row = [Fraction(v) for v in r] + [Fraction(0)] * n_slack
        row[n_vars + k] = Fraction(1)
        rows.append(row)
        rhs.append(Fraction(b))
    for r, b in zip(eq_rows, eq_rhs):
        rows.append([Fraction(v) for v in r] + [Fraction(0)] * n_slack)
        rhs.append(Fraction(b))
    for row in rows:
        if len(row) != width:
            raise ValueError("constraint row has the wrong length")
    if not rows:
        return [Fraction(0)] * n_vars

    m = len(rows)
    for i in range(m):
        if rhs[i] < 0:
            rows[i] = [-v for v in rows[i]]
            rhs[i] = -rhs[i]
    # tableau with one artificial per row
    total = width + m
    tab = []
    for i in range(m):
        art = [Fraction(0)] * m
        art[i] = Fraction(1)
        tab.append(rows[i] + art + [rhs[i]])
    basis = [width + i for i in range(m)]
    # objective: minimise sum of artificials -> reduced costs
    obj = [Fraction(0)] * (total + 1)
    for i in range(m):
        for c in range(total + 1):
            obj[c] -= tab[i][c]
    for i in range(m):
        obj[width + i] += 1

    while True:
        enter = next((c for c in range(total) if obj[c] < 0), None)
        if enter is None:
            break
        leave, best = None, None
        for i in range(m):
            a = tab[i][enter]
            if a > 0:
                ratio = tab[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    leave, best = i, ratio
        if leave is None:  # cannot happen in phase 1 (objective bounded below)
            break
        piv = tab[leave][enter]
        tab[leave] = [v / piv for v in tab[leave]]
        for i in range(m):
            if i != leave and tab[i][enter] != 0:
                f = tab[i][enter]
                tab[i] = [v - f * w for v, w in zip(tab[i], tab[leave])]
        if obj[enter] != 0:
            f = obj[enter]
            obj = [v - f * w for v, w in zip(obj, tab[leave])]
        basis[leave] = enter

    if -obj[-1] != 0:
        return None
    x = [Fraction(0)] * total
    for i, b in enumerate(basis):
        x[b] = tab[i][-1]
    return x[:n_vars]
