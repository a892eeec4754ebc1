//! Socket transport: each rig is a TCP client writing wire records to the
//! fusion endpoint. Received records are merged exactly like a file replay.

use std::io::{self, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::thread;

use super::wire::{encode_measurement, read_records, WireError};
use super::{merge_streams, Measurement};
use crate::scalar::Real;

pub struct RigClient {
    out: BufWriter<TcpStream>,
}

impl RigClient {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        Ok(Self { out: BufWriter::new(TcpStream::connect(addr)?) })
    }

    pub fn send<T: Real>(&mut self, m: &Measurement<T>) -> io::Result<()> {
        writeln!(self.out, "{}", encode_measurement(m))
    }

    /// Flushes and closes the connection.
    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()?;
        self.out.get_ref().shutdown(std::net::Shutdown::Write)
    }
}

pub struct FusionEndpoint {
    listener: TcpListener,
}

impl FusionEndpoint {
    pub fn bind(addr: impl ToSocketAddrs) -> io::Result<Self> {
        Ok(Self { listener: TcpListener::bind(addr)? })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts `n_rigs` connections, reads each until its client closes, and
    /// returns the merged arrival-ordered stream.
    pub fn collect<T: Real + Send + 'static>(&self, n_rigs: usize) -> Result<Vec<Measurement<T>>, WireError> {
        let mut readers = Vec::with_capacity(n_rigs);
        for _ in 0..n_rigs {
            let (stream, _) = self.listener.accept().map_err(|e| WireError::Io(e.to_string()))?;
            readers.push(thread::spawn(move || read_records::<T, _>(BufReader::new(stream))));
        }
        let mut streams = Vec::with_capacity(n_rigs);
        for r in readers {
            streams.push(r.join().map_err(|_| WireError::Io("reader thread panicked".into()))??);
        }
        Ok(merge_streams(streams))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::{quantize_time, read_records, write_records};
    use nalgebra::Vector3;

    fn stream(rig_id: u32, latency: f64) -> Vec<Measurement<f64>> {
        (0..30)
            .map(|k| {
                let t = quantize_time(rig_id as f64 * 0.0067 + k as f64 * 0.04);
                Measurement {
                    rig_id,
                    t_capture: t,
                    t_arrival: quantize_time(t + latency),
                    z: Vector3::new(10.0 - k as f64 * 0.3, rig_id as f64 * 0.01, 1.0 + k as f64 * 0.02),
                    sigma: 0.07,
                }
            })
            .collect()
    }

    #[test]
    fn socket_matches_file_replay() {
        let streams: Vec<_> = (0..4).map(|r| stream(r, 0.05 + 0.03 * r as f64)).collect();

        let mut file = Vec::new();
        write_records(&mut file, &merge_streams(streams.clone())).unwrap();
        let from_file: Vec<Measurement<f64>> = read_records(file.as_slice()).unwrap();

        let endpoint = FusionEndpoint::bind("127.0.0.1:0").unwrap();
        let addr = endpoint.local_addr().unwrap();
        let senders: Vec<_> = streams
            .into_iter()
            .map(|s| {
                thread::spawn(move || {
                    let mut c = RigClient::connect(addr).unwrap();
                    for m in &s {
                        c.send(m).unwrap();
                    }
                    c.finish().unwrap();
                })
            })
            .collect();
        let from_socket: Vec<Measurement<f64>> = endpoint.collect(4).unwrap();
        for s in senders {
            s.join().unwrap();
        }
        assert_eq!(from_socket, from_file);
    }
}
