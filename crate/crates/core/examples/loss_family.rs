//! Values and margin derivatives of every loss across a range of margins,
//! plus the margin each one settles at.

use vpo::losses::{stationary_margin, LossConfig, LossKind, StationaryMargin};

fn main() -> vpo::Result<()> {
    let beta = 0.1;
    let p = 0.91;
    let base = LossConfig::new(LossKind::Dpo, beta, 0.1)?;

    println!("beta = {beta}, target p = {p}, epsilon = 0.1 (cdpo/rdpo)\n");
    print!("{:>7}", "margin");
    for kind in LossKind::ALL {
        print!("{:>18}", kind.to_string());
    }
    println!();
    for delta in [-4.0, -1.0, 0.0, 1.0, 2.3136, 4.1, 5.0, 10.0, 30.0] {
        print!("{delta:>7.3}");
        for kind in LossKind::ALL {
            let e = base.with_kind(kind).eval(delta, Some(p))?;
            print!("{:>9.4} {:>+8.4}", e.value, e.d_margin);
        }
        println!();
    }

    println!("\nstationary margins:");
    for kind in LossKind::ALL {
        match stationary_margin(kind, p, &base.with_kind(kind)) {
            StationaryMargin::Finite(m) => println!("  {kind:<5} {m:.6}"),
            StationaryMargin::Unbounded => println!("  {kind:<5} none (derivative stays negative)"),
        }
    }
    Ok(())
}
