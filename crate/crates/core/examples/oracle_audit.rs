//! Closed forms against brute-force oracles.

use l3ae::oracle::{kkt_solve, projected_gradient, run_audit, KktProblem, OracleInstance};

fn main() -> l3ae::Result<()> {
    let inst = OracleInstance::random(1);
    let problem = KktProblem::ease(&inst.x, 2.0);
    let exact = kkt_solve(&problem)?;
    let approx = projected_gradient(&problem, 5_000, None)?;
    println!(
        "{}x{} instance: kkt objective {:.6}, gradient objective {:.6}, max gap {:.2e}",
        inst.x.nrows(),
        inst.n(),
        problem.objective(&exact),
        problem.objective(&approx),
        (&exact - &approx).amax()
    );

    let report = run_audit(8, 0, 5_000)?;
    print!("{}", report.to_tsv());
    println!("all passed: {}", report.passed());
    Ok(())
}
