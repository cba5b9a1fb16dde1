use equal_impact::fairness::{adr_group, adr_group_mean, adr_user, cesaro, density_bins, dispersion};

fn main() -> equal_impact::Result<()> {
    let decisions = vec![
        vec![true, true, true, false, true],
        vec![true, true, false, false, false],
        vec![true, true, true, true, true],
    ];
    let repaid = vec![
        vec![true, false, true, false, true],
        vec![false, true, false, false, false],
        vec![true, true, true, true, false],
    ];
    for (i, (d, r)) in decisions.iter().zip(&repaid).enumerate() {
        println!("user {i}: adr {:?}", adr_user(d, r)?);
    }
    println!("pooled group adr:   {:?}", adr_group(&decisions, &repaid, &[0, 1, 2])?);
    println!("mean of member adr: {:?}", adr_group_mean(&decisions, &repaid, &[0, 1, 2])?);

    println!("cesaro [1, 2, 3] = {:?}", cesaro(&[1.0, 2.0, 3.0])?);
    let d = dispersion(&[vec![0.0, 0.2], vec![1.0, 0.4]])?;
    println!("mean {:?} std {:?}", d.mean, d.std);
    println!("bins {:?}", density_bins(&[0.1, 0.6, 0.7], 0.5)?);
    Ok(())
}
