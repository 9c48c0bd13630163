use dpdpu_core::compute::kernels::deflate;
use dpdpu_core::compute::{KernelCall, KernelOp, Placement};
use dpdpu_core::error::{Error, StateError};
use dpdpu_core::hwmodel::{builtin, ComputeUnitId, CostDefaults, TenantId, UnitClass, PAGE_SIZE};
use dpdpu_core::runtime::{NodeId, Output, Pipeline, PipelineMode, Runtime, SprocCtx, Stage, TokenState};

const N0: NodeId = NodeId(0);
const N1: NodeId = NodeId(1);

fn runtime() -> Runtime {
    Runtime::builder(builtin("bf2").unwrap()).build().unwrap()
}

fn no_dispatch() -> Runtime {
    let mut d = CostDefaults::builtin();
    d.dpu.sproc_dispatch_cycles = 0.0;
    Runtime::builder(builtin("bf2").unwrap()).defaults(d).build().unwrap()
}

fn ready_bytes(state: TokenState) -> Vec<u8> {
    match state {
        TokenState::Ready(c) => c.output.into_bytes().unwrap_or_default(),
        other => panic!("not ready: {other:?}"),
    }
}

#[test]
fn identity_sproc_returns_input() {
    let rt = runtime();
    rt.register_sproc("echo", |_ctx, req| async move { Ok(req) }).unwrap();
    let t = rt.invoke_sproc(N0, "echo", b"hello".to_vec()).unwrap();
    rt.run().unwrap();
    assert_eq!(ready_bytes(rt.token_state(t)), b"hello");
}

#[test]
fn unknown_and_duplicate_sprocs_error() {
    let rt = runtime();
    assert_eq!(rt.invoke_sproc(N0, "nope", vec![]), Err(Error::UnknownSproc("nope".into())));
    rt.register_sproc("a", |_ctx, req| async move { Ok(req) }).unwrap();
    assert_eq!(rt.register_sproc("a", |_ctx, req| async move { Ok(req) }), Err(Error::DuplicateSproc("a".into())));
}

#[test]
fn sproc_failure_propagates() {
    let rt = runtime();
    rt.register_sproc("bad", |ctx: SprocCtx, _| async move {
        ctx.file_read(42, 0, 1).await?;
        Ok(vec![])
    })
    .unwrap();
    let t = rt.invoke_sproc(N0, "bad", vec![]).unwrap();
    rt.run().unwrap();
    assert!(matches!(rt.token_state(t), TokenState::Failed(Error::Storage(_))));
}

/// Reads pages, compresses each on the accelerator (falling back to a DPU
/// core when refused) and sends each to the peer.
async fn read_compress_send(ctx: SprocCtx, req: Vec<u8>) -> Result<Vec<u8>, Error> {
    let pages = u64::from(req[0]);
    let ch = ctx.runtime().ne_open(ctx.node(), N1)?;
    for p in 0..pages {
        let page = ctx.file_read(7, p * PAGE_SIZE, PAGE_SIZE as u32).await?;
        let op = KernelOp::Compress(page);
        let out = match ctx.kernel(KernelCall::new(op.clone(), Placement::Specified(UnitClass::DpuAsic))).await {
            Err(Error::Refused) => ctx.kernel(KernelCall::new(op, Placement::Specified(UnitClass::DpuCpu))).await?,
            other => other?,
        };
        ctx.send(&ch, out.output.into_bytes().unwrap()).await?;
    }
    Ok(vec![])
}

#[test]
fn read_compress_send_matches_direct_kernels() {
    for profile in ["bf2", "bf3"] {
        let rt = Runtime::builder(builtin(profile).unwrap()).build().unwrap();
        let pages: Vec<Vec<u8>> = (0..4u8).map(|i| format!("page {i} ").repeat(1200).into_bytes()[..8192].to_vec()).collect();
        rt.fs_create(N0, 7, 4 * PAGE_SIZE).unwrap();
        rt.preload(N0, 7, 0, pages.concat()).unwrap();
        rt.register_sproc("rcs", read_compress_send).unwrap();
        let t = rt.invoke_sproc(N0, "rcs", vec![4]).unwrap();
        rt.run().unwrap();
        assert!(matches!(rt.token_state(t), TokenState::Ready(_)), "{profile}");
        let server = rt.ne_accept(N1).unwrap();
        let recvs: Vec<_> = (0..4).map(|_| rt.ne_recv(&server).unwrap()).collect();
        rt.run().unwrap();
        for (r, page) in recvs.iter().zip(&pages) {
            let got = ready_bytes(rt.token_state(*r));
            assert_eq!(got, deflate::compress(page));
            assert_eq!(deflate::decompress(&got).unwrap(), *page);
        }
    }
}

#[test]
fn sproc_runs_are_deterministic() {
    let run = || {
        let rt = runtime();
        rt.fs_create(N0, 7, 8 * PAGE_SIZE).unwrap();
        rt.preload(N0, 7, 0, vec![3; 8 * PAGE_SIZE as usize]).unwrap();
        rt.register_sproc("rcs", read_compress_send).unwrap();
        rt.invoke_sproc(N0, "rcs", vec![8]).unwrap();
        rt.run().unwrap();
        (rt.now(), rt.ledger(N0), rt.ledger(N1))
    };
    assert_eq!(run(), run());
}

fn occupy_stage(name: &str, unit: ComputeUnitId, ns: u64) -> Stage {
    Stage::new(name, move |ctx: SprocCtx, item| async move {
        ctx.occupy(unit, ns).await?;
        Ok(item)
    })
}

fn equal_stages(s: u32, t: u64) -> Pipeline {
    (0..s).fold(Pipeline::new(), |p, i| p.stage(occupy_stage(&format!("s{i}"), ComputeUnitId::dpu(i + 1), t)))
}

#[test]
fn single_item_makespan_is_stage_sum() {
    let rt = no_dispatch();
    let p = Pipeline::new()
        .stage(occupy_stage("a", ComputeUnitId::dpu(1), 300))
        .stage(occupy_stage("b", ComputeUnitId::dpu(2), 500))
        .stage(occupy_stage("c", ComputeUnitId::host(0), 700));
    let ctx = rt.ctx(N0);
    let stats = rt.block_on(async move { ctx.run_pipeline(&p, vec![vec![1]], PipelineMode::Pipelined).await }).unwrap();
    assert_eq!(stats.makespan_ns, 1500);
    assert_eq!(stats.stage_busy_ns, vec![300, 500, 700]);
}

#[test]
fn equal_stage_pipeline_formula() {
    for (n, s) in [(8usize, 3u32), (1, 1), (5, 2), (16, 4), (3, 6)] {
        let t = 1000;
        let rt = no_dispatch();
        let ctx = rt.ctx(N0);
        let p = equal_stages(s, t);
        let items = vec![vec![0u8]; n];
        let (piped, seq) = rt
            .block_on(async move {
                let a = ctx.run_pipeline(&p, items.clone(), PipelineMode::Pipelined).await;
                let b = ctx.run_pipeline(&p, items, PipelineMode::Sequential).await;
                (a, b)
            })
            .unwrap();
        assert_eq!(piped.makespan_ns, (n as u64 + u64::from(s) - 1) * t, "n={n} s={s}");
        assert_eq!(seq.makespan_ns, n as u64 * u64::from(s) * t);
        assert_eq!(piped.completed, n);
    }
}

#[test]
fn wider_window_never_slower() {
    let makespan = |w: usize| {
        let rt = no_dispatch();
        rt.fs_create(N0, 1, 64 * PAGE_SIZE).unwrap();
        let read = Stage::new("read", |ctx: SprocCtx, item: Vec<u8>| async move {
            ctx.file_read(1, u64::from(item[0]) * PAGE_SIZE, PAGE_SIZE as u32).await
        })
        .window(w);
        let compute = occupy_stage("compute", ComputeUnitId::dpu(5), 2_000).window(w);
        let p = Pipeline::new().stage(read).stage(compute);
        let ctx = rt.ctx(N0);
        let items = (0..32u8).map(|i| vec![i]).collect();
        rt.block_on(async move { ctx.run_pipeline(&p, items, PipelineMode::Pipelined).await }).unwrap().makespan_ns
    };
    let (w1, w4) = (makespan(1), makespan(4));
    assert!(w4 <= w1, "w4 {w4} > w1 {w1}");
    assert!(w4 < w1, "reads should overlap with a wider window");
}

#[test]
fn failed_item_skips_downstream_only() {
    let rt = no_dispatch();
    let first = Stage::new("maybe-fail", |ctx: SprocCtx, item: Vec<u8>| async move {
        ctx.occupy(ComputeUnitId::dpu(1), 100).await?;
        if item[0] == 2 {
            return Err(Error::Invalid("bad item".into()));
        }
        Ok(item)
    });
    let p = Pipeline::new().stage(first).stage(occupy_stage("next", ComputeUnitId::dpu(2), 100));
    let ctx = rt.ctx(N0);
    let items = (0..5u8).map(|i| vec![i]).collect();
    let stats = rt.block_on(async move { ctx.run_pipeline(&p, items, PipelineMode::Pipelined).await }).unwrap();
    assert_eq!((stats.completed, stats.failed), (4, 1));
    assert!(stats.is_partial());
    assert!(stats.outputs[2].is_err());
    assert_eq!(stats.outputs[4], Ok(vec![4]));
    assert_eq!(stats.stage_busy_ns[1], 400);
}

#[test]
fn random_pipelines_never_lose_to_sequential() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let s = rng.gen_range(1..5u32);
        let n = rng.gen_range(1..12usize);
        let times: Vec<u64> = (0..s).map(|_| rng.gen_range(1..5_000)).collect();
        let window = rng.gen_range(1..6);
        let rt = no_dispatch();
        let p = times.iter().enumerate().fold(Pipeline::new(), |p, (i, &t)| {
            p.stage(occupy_stage("x", ComputeUnitId::dpu(i as u32 + 1), t).window(window))
        });
        let ctx = rt.ctx(N0);
        let items = vec![vec![0u8]; n];
        let (a, b) = rt
            .block_on(async move {
                let a = ctx.run_pipeline(&p, items.clone(), PipelineMode::Pipelined).await;
                let b = ctx.run_pipeline(&p, items, PipelineMode::Sequential).await;
                (a, b)
            })
            .unwrap();
        assert!(a.makespan_ns <= b.makespan_ns);
        if n > 1 && s > 1 {
            assert!(a.makespan_ns < b.makespan_ns);
        }
    }
}

#[test]
fn drr_shares_follow_weights() {
    let rt = runtime();
    rt.set_fair(N0, 4096, &[(TenantId(1), 2), (TenantId(2), 1)], 1);
    for _ in 0..300 {
        for tenant in [1u8, 2] {
            let call = KernelCall::new(KernelOp::Compress(vec![9; 4096]), Placement::Specified(UnitClass::HostCpu))
                .tenant(TenantId(tenant));
            rt.submit_fair(N0, call).unwrap();
        }
    }
    // with a window of one, only the first call has been charged so far
    let per_call = rt.ledger(N0).tenant_busy_ns(TenantId(1));
    // stop while both tenants are still backlogged
    rt.run_until(per_call * 300).unwrap();
    let l = rt.ledger(N0);
    let ratio = l.tenant_busy_ns(TenantId(1)) as f64 / l.tenant_busy_ns(TenantId(2)) as f64;
    assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
    rt.run().unwrap();
    let l = rt.ledger(N0);
    assert_eq!(l.tenant_busy_ns(TenantId(1)), l.tenant_busy_ns(TenantId(2)));
}

#[test]
fn fair_queue_delivers_outputs() {
    let rt = runtime();
    rt.set_fair(N0, 1024, &[], 2);
    let data = b"fair and square ".repeat(50);
    let t = rt
        .submit_fair(N0, KernelCall::new(KernelOp::Compress(data.clone()), Placement::Scheduled))
        .unwrap();
    rt.run().unwrap();
    let TokenState::Ready(c) = rt.token_state(t) else { panic!() };
    let Output::Kernel(k) = c.output else { panic!() };
    assert_eq!(deflate::decompress(&k.into_bytes().unwrap()).unwrap(), data);
}

#[test]
fn shared_state_budget() {
    let profile = builtin("bf2").unwrap();
    let mut d = CostDefaults::builtin();
    d.dpu.mem_reserve_bytes = profile.dpu_mem_bytes - 4096;
    let rt = Runtime::builder(profile).defaults(d).build().unwrap();
    let (_, budget) = rt.state_used(N0);
    assert_eq!(budget, 4096);
    rt.state_put(N0, b"k", b"v1".to_vec()).unwrap();
    rt.state_put(N0, b"k", b"v2".to_vec()).unwrap();
    assert_eq!(rt.state_get(N0, b"k").unwrap(), b"v2");
    assert_eq!(rt.state_get(N0, b"absent"), None);
    assert_eq!(rt.state_put(N0, b"", vec![1]), Err(StateError::EmptyKey));
    let err = rt.state_put(N0, b"big", vec![0; budget as usize]).unwrap_err();
    assert!(matches!(err, StateError::OverBudget { .. }));
    assert_eq!(rt.state_get(N0, b"k").unwrap(), b"v2");
    // state is per node
    assert_eq!(rt.state_get(N1, b"k"), None);
}

#[test]
fn sproc_dispatch_is_charged_to_control_core() {
    let rt = runtime();
    rt.fs_create(N0, 1, 8192).unwrap();
    rt.register_sproc("two-reads", |ctx: SprocCtx, _| async move {
        ctx.file_read(1, 0, 10).await?;
        ctx.file_read(1, 10, 10).await
    })
    .unwrap();
    rt.invoke_sproc(N0, "two-reads", vec![]).unwrap();
    rt.run().unwrap();
    let dispatch_ns = (rt.defaults().dpu.sproc_dispatch_cycles / 2.5).round() as u64;
    assert!(rt.ledger(N0).busy_ns(ComputeUnitId::dpu(0)) >= 2 * dispatch_ns);
    assert_eq!(rt.ledger(N0).class_busy_ns(UnitClass::HostCpu), 0);
}
