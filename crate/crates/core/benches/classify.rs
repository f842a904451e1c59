use criterion::{criterion_group, criterion_main, Criterion};

use ctc1::enumerate::{classify, Exec};
use ctc1::machines::MachineSpec;
use ctc1::postselect::postselect_to_ctc;
use ctc1::zoo;

fn bench(c: &mut Criterion) {
    let leq = postselect_to_ctc(&MachineSpec::Pfa(zoo::build_leq_postpfa())).unwrap();
    let union = MachineSpec::Dpda(zoo::build_union_ijk_ctc_dpda());
    let mut g = c.benchmark_group("classify");
    g.sample_size(10);
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        g.bench_function(format!("leq-ctc/len8/{name}"), |b| {
            b.iter(|| classify(&leq, 8, zoo::is_leq, exec).unwrap())
        });
        g.bench_function(format!("union-ijk/len8/{name}"), |b| {
            b.iter(|| classify(&union, 8, zoo::is_union_ijk, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
