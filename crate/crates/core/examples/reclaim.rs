//! Epoch-based reclamation: slots of extracted items are reused once no
//! reader can still see them.

use depq::{Depq, End, ListDepq, ListDepqConfig, ReclaimMode};

fn main() {
    let q = ListDepq::with_config(ListDepqConfig {
        reclaim: ReclaimMode::Epoch,
        ..Default::default()
    })
    .unwrap();
    for round in 0..100 {
        for k in 0..10 {
            q.insert(k);
        }
        let end = if round % 2 == 0 { End::Min } else { End::Max };
        while q.extract(end).is_some() {}
    }
    let c = q.stats().reclaim;
    println!(
        "1000 inserts: {} unlinks, {} retired, {} freed, {} arena slots used",
        c.unlinks,
        c.retirements,
        c.deallocations,
        q.arena().slots_used()
    );
}
