use std::collections::BTreeSet;
use std::net::TcpListener;
use std::time::Duration;

use rsvl::caption::{build_manifest, CaptionClient, CaptionError, ClientConfig, ImageRef};
use rsvl::mock::{MockBehavior, MockCaptionServer};
use rsvl_core::dataset::PromptId;
use rsvl_core::CropRect;

fn image(id: &str, w: u32, h: u32) -> ImageRef {
    ImageRef {
        image_id: id.into(),
        source_dataset: "UCM".into(),
        width: w,
        height: h,
        image_b64: None,
    }
}

fn client(url: String) -> CaptionClient {
    CaptionClient::new(ClientConfig {
        backoff: Duration::from_millis(1),
        timeout: Duration::from_secs(10),
        ..ClientConfig::new(url)
    })
}

fn server(behavior: MockBehavior) -> MockCaptionServer {
    MockCaptionServer::start(behavior, 4).unwrap()
}

#[test]
fn caption_is_returned_verbatim_and_prompt_text_is_canonical() {
    let srv = server(MockBehavior::default());
    let c = client(srv.url());
    let mut im = image("a1", 600, 400);
    im.image_b64 = Some("aGVsbG8=".into());
    assert_eq!(
        c.caption_image(&im, PromptId::Short).unwrap(),
        "cap:Write a short description for the image."
    );
    assert_eq!(
        c.caption_image(&im, PromptId::Detail).unwrap(),
        "cap:Describe the image in detail"
    );
    let reqs = srv.requests();
    assert_eq!(reqs.len(), 2);
    assert_eq!(reqs[0].prompt, "Write a short description for the image.");
    assert_eq!(reqs[1].prompt, "Describe the image in detail");
    assert_eq!(reqs[0].image_b64.as_deref(), Some("aGVsbG8="));
    assert_eq!(reqs[0].image_id, "a1");
}

#[test]
fn two_server_errors_then_success() {
    let srv = server(MockBehavior {
        fail_first: 2,
        ..MockBehavior::default()
    });
    let c = client(srv.url());
    assert_eq!(
        c.caption_image(&image("x", 10, 10), PromptId::Short)
            .unwrap(),
        "cap:Write a short description for the image."
    );
    assert_eq!(srv.request_count(), 3);
}

#[test]
fn persistent_server_errors_exhaust_retries() {
    let srv = server(MockBehavior {
        fail_ids: BTreeSet::from(["bad".to_string()]),
        ..MockBehavior::default()
    });
    let c = client(srv.url());
    let err = c
        .caption_image(&image("bad", 10, 10), PromptId::Short)
        .unwrap_err();
    assert!(
        matches!(err, CaptionError::EndpointDown { attempts: 4, .. }),
        "{err}"
    );
    assert_eq!(srv.request_count(), 4);
}

#[test]
fn non_json_success_is_malformed_and_not_retried() {
    let srv = server(MockBehavior {
        malformed_ids: BTreeSet::from(["m".to_string()]),
        ..MockBehavior::default()
    });
    let c = client(srv.url());
    let err = c
        .caption_image(&image("m", 10, 10), PromptId::Detail)
        .unwrap_err();
    assert!(matches!(err, CaptionError::MalformedResponse(_)), "{err}");
    assert_eq!(srv.request_count(), 1);
}

#[test]
fn unknown_path_is_rejected_without_retry() {
    let srv = server(MockBehavior::default());
    let c = client(format!("{}/nested", srv.url()));
    let err = c
        .caption_image(&image("x", 10, 10), PromptId::Short)
        .unwrap_err();
    assert!(
        matches!(err, CaptionError::Rejected { status: 404, .. }),
        "{err}"
    );
}

#[test]
fn closed_port_is_endpoint_down() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let c = client(format!("http://127.0.0.1:{port}"));
    let err = c
        .caption_image(&image("x", 10, 10), PromptId::Short)
        .unwrap_err();
    assert!(
        matches!(err, CaptionError::EndpointDown { attempts: 4, .. }),
        "{err}"
    );
}

#[test]
fn three_images_give_six_ordered_records() {
    let srv = server(MockBehavior {
        max_delay: Duration::from_millis(15),
        ..MockBehavior::default()
    });
    let images = [
        image("i0", 1024, 768),
        image("i1", 100, 100),
        image("i2", 512, 2048),
    ];
    let out = build_manifest(&images, &client(srv.url()));
    assert!(out.failures.is_empty());
    let keys: Vec<(&str, PromptId)> = out
        .records
        .iter()
        .map(|r| (r.image_id.as_str(), r.prompt_id))
        .collect();
    assert_eq!(
        keys,
        vec![
            ("i0", PromptId::Short),
            ("i0", PromptId::Detail),
            ("i1", PromptId::Short),
            ("i1", PromptId::Detail),
            ("i2", PromptId::Short),
            ("i2", PromptId::Detail),
        ]
    );
    assert_eq!(out.records[0].crop, CropRect::new(85, 0, 512, 512));
    assert_eq!(out.records[2].crop, CropRect::new(0, 0, 512, 512));
    assert_eq!(out.records[4].crop, CropRect::new(0, 768, 512, 512));
    assert_eq!(srv.request_count(), 6);
}

#[test]
fn one_permanent_failure_drops_that_image_only() {
    let srv = server(MockBehavior {
        fail_ids: BTreeSet::from(["i1".to_string()]),
        ..MockBehavior::default()
    });
    let images = [
        image("i0", 64, 64),
        image("i1", 64, 64),
        image("i2", 64, 64),
    ];
    let out = build_manifest(&images, &client(srv.url()));
    assert_eq!(out.records.len(), 4);
    assert_eq!(out.failures.len(), 1);
    assert_eq!(out.failures[0].image_id, "i1");
    assert!(out.records.iter().all(|r| r.image_id != "i1"));
}

#[test]
fn unplannable_image_fails_without_a_request() {
    let srv = server(MockBehavior::default());
    let out = build_manifest(
        &[image("zero", 0, 10), image("ok", 10, 10)],
        &client(srv.url()),
    );
    assert_eq!(out.records.len(), 2);
    assert_eq!(out.failures.len(), 1);
    assert_eq!(out.failures[0].prompt_id, None);
    assert_eq!(srv.request_count(), 2);
}

#[test]
fn serial_and_concurrent_runs_agree() {
    let srv = server(MockBehavior {
        max_delay: Duration::from_millis(5),
        ..MockBehavior::default()
    });
    let images: Vec<ImageRef> = (0..10).map(|i| image(&format!("s{i}"), 32, 32)).collect();
    let serial = CaptionClient::new(ClientConfig {
        concurrency: 1,
        ..ClientConfig::new(srv.url())
    });
    let a = build_manifest(&images, &serial);
    let b = build_manifest(&images, &client(srv.url()));
    assert_eq!(a, b);
    assert_eq!(a.records.len(), 20);
}
