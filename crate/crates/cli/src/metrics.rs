//! Metrics table rendering.
//!
//! Fixed header `round,acc,asr,epsilon_hat,pi_0..pi_{K-1},malicious_actual`
//! with one row per evaluated round. Cells that do not apply to the run
//! (asr without a backdoor, posteriors for baseline rules) stay empty, so
//! every file has the same shape for a given client count.

use brafl_core::fedsim::RoundRecord;

pub fn render_metrics(records: &[RoundRecord], clients: usize) -> String {
    let mut out = String::from("round,acc,asr,epsilon_hat");
    for k in 0..clients {
        out.push_str(&format!(",pi_{k}"));
    }
    out.push_str(",malicious_actual\n");

    for record in records {
        out.push_str(&format!("{},{:.6},", record.round, record.acc));
        if let Some(asr) = record.asr {
            out.push_str(&format!("{asr:.6}"));
        }
        out.push(',');
        if let Some(eps) = record.epsilon_hat {
            out.push_str(&format!("{eps:.6}"));
        }
        match &record.pi {
            Some(pi) => {
                for p in pi {
                    out.push_str(&format!(",{p:.6}"));
                }
            }
            None => {
                for _ in 0..clients {
                    out.push(',');
                }
            }
        }
        out.push(',');
        let ids: Vec<String> = record
            .actual_malicious
            .iter()
            .map(|id| id.to_string())
            .collect();
        out.push_str(&ids.join(";"));
        out.push('\n');
    }
    out
}
