use num_complex::Complex64 as C;
use swfid::disk::*;
use swfid::profile::solve_profile;

fn zero_fields(op: &NormalOp, x: &mut [f64], keep: &[Field]) {
    let n = op.ctx.grid.len();
    for mi in 0..(2 * op.layout.k_max + 2) as usize {
        let m = if mi % 2 == 0 { (mi / 2) as i64 } else { -((mi / 2) as i64) - 1 };
        for f in FIELDS {
            if keep.contains(&f) { continue; }
            for i in 0..n {
                op.set(x, f, m, i, C::ZERO);
            }
        }
    }
}

fn cross(op: &NormalOp, x: &[f64]) -> f64 {
    let (lhs, rhs) = weitzenbock_2d_sides(op, x);
    (lhs - rhs).abs() / lhs.max(1e-300)
}

fn main() {
    let p = solve_profile(12.0, 1200, 1e-9).unwrap();
    for n_r in [60usize, 120, 240] {
        let cx = DiskContext::new(&p, C::ONE, C::new(0.5, 0.0), 16.0, n_r).unwrap();
        let op = assemble_normal_operator(&cx, 3, NormalOpts::default());
        let x = random_admissible_field(&op, 2024);
        let mut parts = vec![];
        for (name, keep) in [
            ("B+Z", vec![Field::B1, Field::B2, Field::Z]),
            ("A+Z", vec![Field::A1, Field::A2, Field::Z]),
            ("W+Z", vec![Field::W, Field::Z]),
            ("all", vec![Field::A1, Field::B1, Field::A2, Field::B2, Field::Z, Field::W]),
        ] {
            let mut y = x.clone();
            zero_fields(&op, &mut y, &keep);
            parts.push(format!("{name}: {:.4e}", cross(&op, &y)));
        }
        println!("n_r={n_r}: {}", parts.join("  "));
    }
}
