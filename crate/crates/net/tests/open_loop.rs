//! Kept in its own test binary so no other test competes for the CPU while
//! dispatch skew is measured.

use infermeter_core::model::RequestSpec;
use infermeter_core::sim::{LatencyModelConfig, PolicyConfig};
use infermeter_net::client::{run_load, EndpointConfig};
use infermeter_net::mock::{serve_mock, MockOptions};

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn open_loop_dispatch_keeps_schedule() {
    let cfg = PolicyConfig::prefill_priority(LatencyModelConfig::default());
    let opts = MockOptions {
        time_scale: 0.0,
        ..Default::default()
    };
    let mock = serve_mock(cfg, "127.0.0.1:0".parse().unwrap(), opts)
        .await
        .unwrap();
    let ep = EndpointConfig::new(mock.base_url(), "mock");
    let w: Vec<RequestSpec> = (0..100)
        .map(|i| RequestSpec::new(i, i as f64 / 10.0, 30, 10))
        .collect();
    let out = run_load(&w, &ep, 1).await.unwrap();
    assert!(
        out.p99_dispatch_skew_s < 0.010,
        "{}",
        out.p99_dispatch_skew_s
    );
    assert!(!out.saturated);
    assert!(out.check_saturation(0.010).is_ok());
    mock.shutdown().await;
}
