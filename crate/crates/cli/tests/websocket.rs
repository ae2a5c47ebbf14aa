use futures_util::{SinkExt, StreamExt};
use kinesnap::arm2;
use kinesnap_cli::server;
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

async fn start() -> String {
    let (addr, serve) = server::bind(arm2(), "127.0.0.1:0".parse().unwrap())
        .await
        .unwrap();
    tokio::spawn(serve);
    format!("ws://{addr}/ws")
}

async fn call<S>(ws: &mut S, msg: Value) -> Value
where
    S: SinkExt<Message>
        + StreamExt<Item = Result<Message, tokio_tungstenite::tungstenite::Error>>
        + Unpin,
    <S as futures_util::Sink<Message>>::Error: std::fmt::Debug,
{
    ws.send(Message::Text(msg.to_string().into()))
        .await
        .unwrap();
    loop {
        match ws.next().await.unwrap().unwrap() {
            Message::Text(t) => return serde_json::from_str(&t).unwrap(),
            _ => continue,
        }
    }
}

#[tokio::test]
async fn sessions_are_isolated() {
    let url = start().await;
    let (mut a, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    let (mut b, _) = tokio_tungstenite::connect_async(&url).await.unwrap();

    let r = call(
        &mut a,
        json!({"kind": "rot", "id": 1, "payload": {"joint": "j1", "degrees": 90}}),
    )
    .await;
    assert_eq!(r["payload"]["angles_deg"][0], 90.0);

    let r = call(&mut b, json!({"kind": "get_state", "id": 7})).await;
    assert_eq!(r["id"], 7);
    assert_eq!(r["payload"]["angles_deg"], json!([0.0, 0.0]));
    assert_eq!(r["payload"]["tip"], json!([2.0, 0.0, 0.0]));
}

#[tokio::test]
async fn concurrent_clients_get_their_own_replies() {
    let url = start().await;
    let mut tasks = Vec::new();
    for c in 0..8 {
        let url = url.clone();
        tasks.push(tokio::spawn(async move {
            let (mut ws, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
            call(
                &mut ws,
                json!({"kind": "set_mode", "id": 0, "payload": {"mode": "ik"}}),
            )
            .await;
            let angle = 0.1 * c as f64;
            let goal = [1.5 * angle.cos(), 1.5 * angle.sin(), 0.0];
            for i in 1..5 {
                let r = call(
                    &mut ws,
                    json!({"kind": "move_effector", "id": i, "payload": {"target": goal}}),
                )
                .await;
                assert_eq!(r["id"], i);
                assert_eq!(r["payload"]["effector_goal"], json!(goal));
                assert_eq!(r["payload"]["last_status"], "converged");
            }
            let r = call(&mut ws, json!({"kind": "nonsense", "id": 9})).await;
            assert_eq!(r["payload"]["code"], "unknown_kind");
            let r = call(&mut ws, json!({"kind": "get_state", "id": 10})).await;
            assert_eq!(r["payload"]["events"], 5);
        }));
    }
    for t in tasks {
        t.await.unwrap();
    }
}
