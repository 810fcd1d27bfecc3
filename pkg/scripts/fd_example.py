"""Print the FD critical points for the default parameters and check they share one line."""

from railfd.fd import DEFAULT_PARAMS, critical_line, critical_line_check, critical_point, jam_density

if __name__ == "__main__":
    p = DEFAULT_PARAMS
    slope, intercept = critical_line(p)
    print(f"critical line: q = {slope:.4f} k {intercept:+.4f}")
    print(f"{'q_p':>8} {'q*':>9} {'k*':>8} {'k_jam':>8} on-line")
    for q_p in range(0, 36000, 4000):
        q, k = critical_point(q_p, p)
        print(f"{q_p:8d} {q:9.4f} {k:8.4f} {jam_density(q_p, p):8.4f} {critical_line_check(q, k, p)}")
