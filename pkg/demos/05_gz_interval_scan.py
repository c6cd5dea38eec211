"""Search for parameters where the limit mountain-pass point must touch the obstacle.

On a ball of radius R a sufficient test asks for lam R^2 inside the interval
(Lambda(phi), U(0)^{p-2}) for some radial test field phi.  With phi = U the
interval is always empty, because Lambda(U) = (p/2) U(0)^{p-2}.  With the
principal eigenfunction it can be nonempty in three dimensions.
"""

from penalab import check_gz_conditions, gz_condition_scan

for N in (1, 2, 3):
    for p in (3.0, 4.0, 5.0):
        if N == 3 and p >= 6:
            continue
        rep = check_gz_conditions(p, N, 1.0, 1.0)
        iv = rep["intervals"]["phi1"]
        state = "nonempty" if iv["nonempty"] else "empty"
        print(f"N={N} p={p:g}: Lambda(phi1) = {iv['Lambda']:9.3f}, U0^(p-2) = {iv['upper']:9.3f}  ({state})")

print("\nN = 3 grid over lam R^2:")
for row in gz_condition_scan([4.0, 5.0], [40.0, 47.0, 80.0, 200.0, 250.0], 3):
    mark = "yes" if row["ok_phi1"] else "no"
    print(f"  p={row['p']:g} lam R^2={row['lambda_R2']:6g}: {mark}")
