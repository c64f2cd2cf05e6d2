"""Scalar special functions: Gaussian tail and integer-order incomplete gamma.

Only integer gamma orders are supported. For those the regularized incomplete
gamma ratios reduce to a finite Poisson sum, which is exact. The only branch
is which of the two complementary ratios is summed directly.
"""

import math
import operator

from cipc.errors import DomainError

_SQRT2 = math.sqrt(2.0)
_MAX_FACTORIAL_ARG = 170
_RECURRENCE_LIMIT = 700.0


def gaussian_q(x: float) -> float:
    """Standard normal upper-tail probability Q(x) = P(Z > x)."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"gaussian_q needs a finite argument, got {x}")
    return 0.5 * math.erfc(x / _SQRT2)


def gaussian_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _gamma_order(s) -> int:
    try:
        s = operator.index(s)
    except TypeError:
        raise DomainError(f"gamma order must be an integer, got {s!r}") from None
    if s < 1:
        raise DomainError(f"gamma order must be >= 1, got {s}")
    return s


def _check_x(x: float) -> float:
    x = float(x)
    if math.isnan(x) or x < 0.0:
        raise DomainError(f"incomplete gamma argument must be >= 0, got {x}")
    return x


def poisson_term(n: int, x: float) -> float:
    """e^{-x} x^n / n!, evaluated in the log domain so large x stays finite."""
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    return math.exp(-x + n * math.log(x) - math.lgamma(n + 1))


def _poisson_terms(s: int, x: float) -> list[float]:
    """e^{-x} x^n / n! for n = 0..s.

    The product recurrence is exact to a few ulps; the log-domain form loses
    about |x| ulps through exp() and is kept only where e^{-x} underflows.
    """
    if x < _RECURRENCE_LIMIT:
        terms = [math.exp(-x)]
        for n in range(1, s + 1):
            terms.append(terms[-1] * x / n)
        return terms
    return [poisson_term(n, x) for n in range(s + 1)]


def _gamma_ratios(s: int, x: float) -> tuple[float, float]:
    """(lower, upper) regularized ratios, complementary to within an ulp.

    Whichever ratio is at most 1/2 is summed directly (the finite head
    sum_{n<s} for the upper one, the convergent tail sum_{n>=s} for the lower
    one); the other is 1 minus it. Small results keep relative precision.
    """
    if x == 0.0:
        return 0.0, 1.0
    if math.isinf(x):
        return 1.0, 0.0
    terms = _poisson_terms(s, x)
    head = min(1.0, math.fsum(terms[:s]))
    if head <= 0.5:
        return 1.0 - head, head
    # head > 1/2 implies x < s, so successive tail terms shrink by x/(n+1) < 1
    term = terms[s]
    tail = [term]
    n = s
    while term > 1e-17 * tail[0]:
        n += 1
        term *= x / n
        tail.append(term)
    lower = min(0.5, math.fsum(tail))
    return lower, 1.0 - lower


def upper_gamma_regularized(s: int, x: float) -> float:
    """Gamma(s, x) / Gamma(s) = e^{-x} sum_{n<s} x^n/n! for integer s."""
    return _gamma_ratios(_gamma_order(s), _check_x(x))[1]


def lower_gamma_regularized(s: int, x: float) -> float:
    """gamma(s, x) / Gamma(s) = 1 - e^{-x} sum_{n<s} x^n/n! for integer s.

    Near 1 - p_t ~ 0 the subtraction would cancel, so small values come from
    the Poisson tail instead; both routes are the same identity.
    """
    return _gamma_ratios(_gamma_order(s), _check_x(x))[0]


def gamma_factorial(s: int) -> float:
    """Gamma(s) = (s-1)! for integer 1 <= s <= 170."""
    s = _gamma_order(s)
    if s > _MAX_FACTORIAL_ARG:
        raise DomainError(f"Gamma({s}) overflows a double; need s <= {_MAX_FACTORIAL_ARG}")
    return float(math.factorial(s - 1))
