use std::process::ExitCode;
use std::thread;

use rwrs_core::verify::{Verifier, VerifyOptions};

fn main() -> ExitCode {
    let verifier = Verifier::new(VerifyOptions::default());
    let reports: Vec<_> = thread::scope(|s| {
        let handles: Vec<_> = (1..=10u8)
            .map(|id| {
                let v = &verifier;
                s.spawn(move || v.criterion(id))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion thread")).collect()
    });
    let mut failed = 0;
    for (id, report) in (1..=10u8).zip(&reports) {
        match report {
            Ok(r) => {
                print!("{r}");
                failed += !r.pass as usize;
            }
            Err(e) => {
                println!("FAIL [{id}] {e}");
                failed += 1;
            }
        }
    }
    println!();
    for (id, report) in (1..=10u8).zip(&reports) {
        match report {
            Ok(r) => println!("{}", r.line()),
            Err(_) => println!("FAIL [{id}]"),
        }
    }
    println!("\nacceptance: {} passed; {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
