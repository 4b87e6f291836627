//! Stream endpoints: `stdio`, `unix:<path>`, `tcp:<host:port>`.

use std::io::{self, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
#[cfg(unix)]
use std::os::unix::net::{UnixListener, UnixStream};
use std::str::FromStr;
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Stdio,
    Unix(String),
    Tcp(String),
}

impl FromStr for Endpoint {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "stdio" || s == "-" {
            return Ok(Self::Stdio);
        }
        match s.split_once(':') {
            Some(("unix", p)) if !p.is_empty() => Ok(Self::Unix(p.to_string())),
            Some(("tcp", a)) if !a.is_empty() => Ok(Self::Tcp(a.to_string())),
            _ => Err(format!("bad endpoint `{s}` (stdio | unix:<path> | tcp:<host:port>)")),
        }
    }
}

pub type Reader = BufReader<Box<dyn Read + Send>>;
pub type Writer = Box<dyn Write + Send>;

/// One connected duplex stream.
pub struct Conn {
    pub reader: Reader,
    pub writer: Writer,
    pub peer: String,
}

fn conn(r: Box<dyn Read + Send>, w: Writer, peer: String) -> Conn {
    Conn {
        reader: BufReader::new(r),
        writer: w,
        peer,
    }
}

fn tcp_conn(s: TcpStream, timeout: Option<Duration>) -> io::Result<Conn> {
    s.set_read_timeout(timeout)?;
    let peer = s.peer_addr().map(|a| a.to_string()).unwrap_or_default();
    Ok(conn(Box::new(s.try_clone()?), Box::new(s), peer))
}

#[cfg(unix)]
fn unix_conn(s: UnixStream, timeout: Option<Duration>, peer: String) -> io::Result<Conn> {
    s.set_read_timeout(timeout)?;
    Ok(conn(Box::new(s.try_clone()?), Box::new(s), peer))
}

pub fn connect(ep: &Endpoint, timeout: Option<Duration>) -> io::Result<Conn> {
    match ep {
        Endpoint::Stdio => Ok(conn(Box::new(io::stdin()), Box::new(io::stdout()), "stdio".into())),
        Endpoint::Tcp(a) => tcp_conn(TcpStream::connect(a)?, timeout),
        #[cfg(unix)]
        Endpoint::Unix(p) => unix_conn(UnixStream::connect(p)?, timeout, p.clone()),
        #[cfg(not(unix))]
        Endpoint::Unix(_) => Err(io::Error::new(io::ErrorKind::Unsupported, "unix sockets")),
    }
}

pub enum Listener {
    Stdio(bool),
    Tcp(TcpListener),
    #[cfg(unix)]
    Unix(UnixListener, String),
}

impl Listener {
    pub fn bind(ep: &Endpoint) -> io::Result<Self> {
        match ep {
            Endpoint::Stdio => Ok(Self::Stdio(false)),
            Endpoint::Tcp(a) => Ok(Self::Tcp(TcpListener::bind(a)?)),
            #[cfg(unix)]
            Endpoint::Unix(p) => {
                // A stale socket file from an earlier run blocks bind.
                let _ = std::fs::remove_file(p);
                Ok(Self::Unix(UnixListener::bind(p)?, p.clone()))
            }
            #[cfg(not(unix))]
            Endpoint::Unix(_) => Err(io::Error::new(io::ErrorKind::Unsupported, "unix sockets")),
        }
    }

    /// Human-readable bound address (resolves `tcp:…:0`).
    pub fn local(&self) -> String {
        match self {
            Self::Stdio(_) => "stdio".into(),
            Self::Tcp(l) => l.local_addr().map(|a| format!("tcp:{a}")).unwrap_or_default(),
            #[cfg(unix)]
            Self::Unix(_, p) => format!("unix:{p}"),
        }
    }

    /// Next connection; stdio yields exactly one.
    pub fn accept(&mut self, timeout: Option<Duration>) -> io::Result<Option<Conn>> {
        match self {
            Self::Stdio(used) => {
                if *used {
                    return Ok(None);
                }
                *used = true;
                Ok(Some(conn(
                    Box::new(io::stdin()),
                    Box::new(io::stdout()),
                    "stdio".into(),
                )))
            }
            Self::Tcp(l) => tcp_conn(l.accept()?.0, timeout).map(Some),
            #[cfg(unix)]
            Self::Unix(l, p) => {
                let (s, _) = l.accept()?;
                unix_conn(s, timeout, p.clone()).map(Some)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse() {
        assert_eq!("stdio".parse(), Ok(Endpoint::Stdio));
        assert_eq!("unix:/tmp/x.sock".parse(), Ok(Endpoint::Unix("/tmp/x.sock".into())));
        assert_eq!("tcp:127.0.0.1:0".parse(), Ok(Endpoint::Tcp("127.0.0.1:0".into())));
        assert!("udp:1".parse::<Endpoint>().is_err());
        assert!("unix:".parse::<Endpoint>().is_err());
    }
}
