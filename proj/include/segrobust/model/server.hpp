#ifndef SEGROBUST_MODEL_SERVER_HPP
#define SEGROBUST_MODEL_SERVER_HPP

#include <cstdint>
#include <functional>

#include "segrobust/model/segmenter.hpp"
#include "segrobust/model/wire.hpp"

namespace segrobust {

struct ServeOptions {
  std::size_t max_frame = wire::kDefaultMaxFrame;
};

enum class ServeOutcome { Shutdown, PeerClosed, ProtocolViolation };

// Answers requests in arrival order until shutdown or EOF. Model failures
// become ok=false responses; malformed or oversize frames close the channel.
ServeOutcome serve_connection(wire::FrameChannel& channel, Segmenter& model, const ServeOptions& options = {});

// Listens on 127.0.0.1:port (0 picks a free port, reported through
// on_listening), one thread per connection, until a shutdown request.
void serve_tcp(std::uint16_t port, Segmenter& model, const ServeOptions& options = {},
               const std::function<void(std::uint16_t)>& on_listening = {});

}  // namespace segrobust

#endif  // SEGROBUST_MODEL_SERVER_HPP
