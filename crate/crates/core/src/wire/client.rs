use std::io::{Read, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::WireError;
use super::frame::{DEFAULT_MAX_PAYLOAD, FrameDecoder};
use super::message::Message;

/// Cloneable sending half of a broker session. Frame writes are atomic under
/// an internal lock, so multiple threads may share one sender.
#[derive(Clone)]
pub struct ClientSender {
    stream: Arc<Mutex<TcpStream>>,
}

impl ClientSender {
    fn send(&self, msg: &Message) -> Result<(), WireError> {
        let frame = msg.to_frame()?;
        let mut stream = self.stream.lock().unwrap();
        stream.write_all(&frame)?;
        Ok(())
    }

    pub fn advertise(&self, topic: &str, type_name: &str) -> Result<(), WireError> {
        self.send(&Message::Advertise {
            topic: topic.to_string(),
            type_name: type_name.to_string(),
        })
    }

    pub fn subscribe(&self, topic: &str) -> Result<(), WireError> {
        self.send(&Message::Subscribe {
            topic: topic.to_string(),
        })
    }

    /// Fire-and-forget publish; ordering is preserved per session.
    pub fn publish(&self, topic: &str, body: &[u8]) -> Result<(), WireError> {
        self.send(&Message::Data {
            topic: topic.to_string(),
            body: body.to_vec(),
        })
    }

    /// Closes the underlying socket, unblocking any reader.
    pub fn close(&self) {
        if let Ok(stream) = self.stream.lock() {
            let _ = stream.shutdown(Shutdown::Both);
        }
    }
}

/// One session against the broker: a sending half plus a blocking receive
/// loop over the same connection.
pub struct Client {
    sender: ClientSender,
    reader: TcpStream,
    decoder: FrameDecoder,
    buf: Vec<u8>,
}

impl Client {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Client, WireError> {
        let stream = TcpStream::connect(addr)?;
        super::tune_stream(&stream)?;
        let reader = stream.try_clone()?;
        Ok(Client {
            sender: ClientSender {
                stream: Arc::new(Mutex::new(stream)),
            },
            reader,
            decoder: FrameDecoder::new(DEFAULT_MAX_PAYLOAD),
            buf: vec![0u8; 64 * 1024],
        })
    }

    pub fn sender(&self) -> ClientSender {
        self.sender.clone()
    }

    pub fn advertise(&self, topic: &str, type_name: &str) -> Result<(), WireError> {
        self.sender.advertise(topic, type_name)
    }

    pub fn subscribe(&self, topic: &str) -> Result<(), WireError> {
        self.sender.subscribe(topic)
    }

    pub fn publish(&self, topic: &str, body: &[u8]) -> Result<(), WireError> {
        self.sender.publish(topic, body)
    }

    /// Blocks until the next message arrives or the connection closes.
    pub fn recv(&mut self) -> Result<Message, WireError> {
        self.reader.set_read_timeout(None)?;
        loop {
            if let Some(msg) = self.pump()? {
                return Ok(msg);
            }
        }
    }

    /// Waits up to `timeout` for a message; `None` on timeout.
    pub fn recv_timeout(&mut self, timeout: Duration) -> Result<Option<Message>, WireError> {
        if let Some((t, p)) = self.decoder.next_frame()? {
            return Ok(Some(Message::decode(t, &p)?));
        }
        self.reader.set_read_timeout(Some(timeout))?;
        let result = self.pump();
        match result {
            Ok(opt) => Ok(opt),
            Err(WireError::Io(e))
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    fn pump(&mut self) -> Result<Option<Message>, WireError> {
        if let Some((t, p)) = self.decoder.next_frame()? {
            return Ok(Some(Message::decode(t, &p)?));
        }
        let n = self.reader.read(&mut self.buf)?;
        if n == 0 {
            return Err(WireError::ConnectionClosed);
        }
        self.decoder.push(&self.buf[..n]);
        match self.decoder.next_frame()? {
            Some((t, p)) => Ok(Some(Message::decode(t, &p)?)),
            None => Ok(None),
        }
    }
}
