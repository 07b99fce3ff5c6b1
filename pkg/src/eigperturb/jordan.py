"""Jordan structure of the target eigenvalue and the block index arithmetic.

Layout in the p-dimensional chain space: blocks j = 1..m are stored in
order; block j consists of j positions, each holding s_j columns.
Position 1 holds eigenvectors and N maps position i+1 to position i.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import SpecError

CASES = ("delta_nonreal", "delta_real", "ham_nonimaginary", "ham_imaginary")
KIND_OF_CASE = {
    "delta_nonreal": "delta_hermitian",
    "delta_real": "delta_hermitian",
    "ham_nonimaginary": "hamiltonian",
    "ham_imaginary": "hamiltonian",
}
# cases whose form block pairs a chain with a partner chain
PAIRED_CASES = ("delta_nonreal", "ham_nonimaginary")


@dataclass(frozen=True)
class JordanSpec:
    m: int
    s: tuple
    signs: tuple = None
    eigenvalue: complex = 0j
    case: str = "delta_real"
    _offsets: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise SpecError(f"m must be a positive integer, got {self.m!r}")
        s = tuple(int(v) for v in self.s)
        if len(s) != self.m:
            raise SpecError(f"s has {len(s)} entries, expected m={self.m}")
        if any(v < 0 for v in s):
            raise SpecError("block counts must be nonnegative")
        if s[-1] == 0:
            raise SpecError("s_m must be positive")
        signs = s if self.signs is None else tuple(int(v) for v in self.signs)
        if len(signs) != self.m:
            raise SpecError(f"signs has {len(signs)} entries, expected m={self.m}")
        for k, (tk, sk) in enumerate(zip(signs, s), start=1):
            if not 0 <= tk <= sk:
                raise SpecError(f"signs[{k}]={tk} outside [0, s_{k}={sk}]")
        if self.case not in CASES:
            raise SpecError(f"unknown case {self.case!r}; expected one of {CASES}")
        lam = complex(self.eigenvalue)
        if self.case == "delta_nonreal" and lam.imag == 0:
            raise SpecError("delta_nonreal needs a nonreal eigenvalue")
        if self.case == "delta_real" and lam.imag != 0:
            raise SpecError("delta_real needs a real eigenvalue")
        if self.case == "ham_imaginary" and lam.real != 0:
            raise SpecError("ham_imaginary needs a purely imaginary eigenvalue")
        if self.case == "ham_nonimaginary" and lam.real == 0:
            raise SpecError("ham_nonimaginary needs a nonzero real part")
        offs, acc = [], 0
        for j, sj in enumerate(s, start=1):
            offs.append(acc)
            acc += j * sj
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "eigenvalue", lam)
        object.__setattr__(self, "_offsets", tuple(offs))

    @property
    def kind(self):
        return KIND_OF_CASE[self.case]

    @property
    def paired(self):
        return self.case in PAIRED_CASES

    @property
    def p(self):
        return sum(j * sj for j, sj in enumerate(self.s, start=1))

    @property
    def target_dim(self):
        """Columns carried by the chain matrices (2p for paired cases)."""
        return 2 * self.p if self.paired else self.p

    @property
    def orders(self):
        """Fractional orders rho with s_rho > 0."""
        return [j for j in range(1, self.m + 1) if self.s[j - 1] > 0]

    def s_of(self, j):
        return self.s[j - 1]

    def rows(self, j, i):
        """Slice of position i (1-based) inside block j."""
        if not (1 <= j <= self.m and 1 <= i <= j):
            raise SpecError(f"no position ({j},{i}) in a spec with m={self.m}")
        sj = self.s[j - 1]
        start = self._offsets[j - 1] + (i - 1) * sj
        return slice(start, start + sj)

    def block(self, j):
        sj = self.s[j - 1]
        start = self._offsets[j - 1]
        return slice(start, start + j * sj)

    def sigma(self, k):
        """Diagonal of the sign block Σ_k (+1 first, then -1)."""
        tk, sk = self.signs[k - 1], self.s[k - 1]
        return np.concatenate([np.ones(tk), -np.ones(sk - tk)])

    def sign_split(self):
        """(positive, negative) inertia of the real-case form block."""
        pos = 0
        for k in range(1, self.m + 1):
            tk, sk = self.signs[k - 1], self.s[k - 1]
            pos += (k // 2) * sk + (tk if k % 2 else 0)
        return pos, self.p - pos

    def with_case(self, case, eigenvalue):
        return JordanSpec(self.m, self.s, self.signs, eigenvalue, case)

    def to_dict(self):
        lam = self.eigenvalue
        return {"m": self.m, "s": list(self.s), "signs": list(self.signs),
                "eigenvalue": [lam.real, lam.imag], "case": self.case}

    @classmethod
    def from_dict(cls, d):
        try:
            lam = d.get("eigenvalue", [0.0, 0.0])
            lam = complex(lam[0], lam[1]) if isinstance(lam, (list, tuple)) else complex(lam)
            return cls(int(d["m"]), tuple(d["s"]), d.get("signs"), lam, d["case"])
        except (KeyError, TypeError, IndexError) as exc:
            raise SpecError(f"malformed Jordan spec: {exc}") from exc


class BlockIndex:
    """Addresses the sub-blocks B_{kl}^{(ij)} of a p x p matrix B.

    ``idx[i, j, k, l]`` returns the s_i x s_j sub-block sitting at
    position k of block i (rows) and position l of block j (columns).
    """

    def __init__(self, spec, B=None):
        self.spec = spec
        self.B = B

    def ranges(self, i, j, k, l):
        return self.spec.rows(i, k), self.spec.rows(j, l)

    def __getitem__(self, key):
        if self.B is None:
            raise SpecError("BlockIndex is not bound to a matrix")
        r, c = self.ranges(*key)
        return self.B[r, c]

    def tiles(self):
        """Yield every (i, j, k, l) with nonempty extent."""
        m = self.spec.m
        for i in range(1, m + 1):
            for k in range(1, i + 1):
                for j in range(1, m + 1):
                    for l in range(1, j + 1):
                        if self.spec.s_of(i) and self.spec.s_of(j):
                            yield i, j, k, l
