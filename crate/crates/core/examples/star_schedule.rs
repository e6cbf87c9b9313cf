//! Builds a σ-family, demands a few star requests and checks the witnesses.

use forcing_lab::seq::{ScheduleConfig, SigmaFamily, StarRequest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ScheduleConfig::default();
    println!("schedule period: {}", config.period());

    let mut fam = SigmaFamily::new(config)?;
    fam.extend(50)?;
    println!("after 50 steps every map is defined below {}", fam.bound());

    let requests = ["2 [1,0;2,2]", "3 [0,1,2]", "1 [0;1;0]"];
    for text in requests {
        let request: StarRequest = text.parse()?;
        let witness = fam.realise(request.clone())?;
        println!(
            "{request}  ->  {witness:?}  (check: {})",
            fam.check_star(&request, &witness)
        );
    }

    for i in 0..fam.rows() {
        let row: Vec<String> = (0..12)
            .map(|v| fam.sigma(i, v).map_or("-".into(), |s| s.to_string()))
            .collect();
        println!("sigma_{i}: {}", row.join(" "));
    }

    let restored = SigmaFamily::from_text(&fam.to_text())?;
    println!("text form restores the family: {}", restored.history() == fam.history());
    Ok(())
}
