"""Independent reference computations shared by the test modules."""

from mpgame.cylinders import CylinderTree


def brute_generation(t: CylinderTree, a, b, g_max: int = 10, k_cap: int = 100_000):
    """Least g <= g_max such that some generation-g cylinder lies in [a, b], else None.

    Plain enumeration of every cylinder meeting [a, b], generation by generation.
    Children run right to left, so a row stops once it passes a, or as soon as one
    child fits inside [a, b] (that already settles the next generation).
    """
    level = [t.root]
    for g in range(g_max + 1):
        if any(a <= t.left_of(n) and t.right_of(n) <= b for n in level):
            return g
        nxt = []
        for n in level:
            for k in range(1, k_cap + 1):
                c = t.child(n, k)
                L, R = t.left_of(c), t.right_of(c)
                if R < a:
                    break
                if L <= b:
                    nxt.append(c)
                if a <= L and R <= b:
                    break
        level = nxt
    return None
