use std::hint::black_box;
use std::time::Duration;

use criterion::{Criterion, Throughput, criterion_group, criterion_main};
use scout_core::wire::{
    Broker, BrokerConfig, Client, FrameDecoder, ImageFrame, Message, PixelEncoding, encode_frame,
};

fn bench_codec(c: &mut Criterion) {
    let frame = ImageFrame::new(
        7,
        123_456,
        640,
        480,
        PixelEncoding::Rgb8,
        vec![33; 640 * 480 * 3],
    )
    .unwrap();
    let body = frame.encode();

    let mut group = c.benchmark_group("codec");
    group.throughput(Throughput::Bytes(body.len() as u64));
    group.bench_function("encode_vga_frame", |b| {
        b.iter(|| encode_frame(0x03, black_box(&body)).unwrap())
    });
    let framed = encode_frame(0x03, &body).unwrap();
    group.bench_function("decode_vga_frame", |b| {
        b.iter(|| {
            let mut dec = FrameDecoder::default();
            dec.push(black_box(&framed));
            dec.next_frame().unwrap().unwrap()
        })
    });
    group.finish();
}

fn bench_broker_roundtrip(c: &mut Criterion) {
    let broker = Broker::bind("127.0.0.1:0", BrokerConfig::default())
        .unwrap()
        .spawn();
    let publisher = Client::connect(broker.addr()).unwrap();
    publisher.advertise("bench", "Bytes").unwrap();
    let mut subscriber = Client::connect(broker.addr()).unwrap();
    subscriber.subscribe("bench").unwrap();
    std::thread::sleep(Duration::from_millis(100));

    let body = vec![0u8; 64 * 1024];
    let mut group = c.benchmark_group("broker");
    group.throughput(Throughput::Bytes(body.len() as u64));
    group.bench_function("publish_recv_64k", |b| {
        b.iter(|| {
            publisher.publish("bench", black_box(&body)).unwrap();
            loop {
                match subscriber.recv_timeout(Duration::from_secs(5)).unwrap() {
                    Some(Message::Data { .. }) => break,
                    _ => continue,
                }
            }
        })
    });
    group.finish();
    broker.shutdown();
}

criterion_group!(benches, bench_codec, bench_broker_roundtrip);
criterion_main!(benches);
