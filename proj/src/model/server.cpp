#include "segrobust/model/server.hpp"

#include <netinet/in.h>
#include <spdlog/spdlog.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstring>
#include <mutex>
#include <thread>
#include <vector>

namespace segrobust {

using wire::json;

namespace {

class LockedSegmenter final : public Segmenter {
 public:
  explicit LockedSegmenter(Segmenter& inner) : inner_(inner) {}
  SegmenterDescriptor descriptor() const override { return inner_.descriptor(); }
  std::vector<MaskPrediction> predict(const ImageTensor& image, const PointPrompt& prompt) override {
    std::lock_guard lock(mutex_);
    return inner_.predict(image, prompt);
  }
  InputGradient input_gradient(const ImageTensor& image, const PointPrompt& prompt, const BinaryMask& truth,
                               const LossSpec& loss, const std::optional<SegPgdStep>& segpgd,
                               std::optional<std::size_t> head) override {
    std::lock_guard lock(mutex_);
    return inner_.input_gradient(image, prompt, truth, loss, segpgd, head);
  }

 private:
  Segmenter& inner_;
  std::mutex mutex_;
};

PointPrompt decode_prompt(const json& node, const ImageTensor& image) {
  if (node.at("type").get<std::string>() != "point") throw ConfigInvalid("only point prompts are supported");
  PointPrompt p{node.at("x").get<Index>(), node.at("y").get<Index>()};
  if (!within(p, image.height(), image.width())) throw ConfigInvalid("prompt point outside the image");
  return p;
}

}  // namespace

ServeOutcome serve_connection(wire::FrameChannel& channel, Segmenter& model, const ServeOptions& options) {
  channel.set_max_frame(options.max_frame);
  for (;;) {
    std::optional<std::string> frame;
    json req;
    try {
      frame = channel.read_frame();
      if (!frame) {
        channel.close();
        return ServeOutcome::PeerClosed;
      }
      req = json::parse(*frame);
      if (!req.is_object() || !req.contains("id") || !req.contains("op")) throw ProtocolError("missing id or op");
      (void)req.at("id").get<std::uint64_t>();
    } catch (const std::exception& e) {
      spdlog::warn("closing connection: {}", e.what());
      channel.close();
      return ServeOutcome::ProtocolViolation;
    }

    const auto id = req.at("id").get<std::uint64_t>();
    const auto op = req.at("op").is_string() ? req.at("op").get<std::string>() : std::string();
    json reply;
    try {
      if (op == "handshake") {
        const int version = req.value("version", wire::kProtocolVersion);
        if (version != wire::kProtocolVersion) {
          reply = wire::error_response(id, "unsupported protocol version " + std::to_string(version));
        } else {
          const auto client_max = req.value("max_frame", options.max_frame);
          const auto negotiated = std::min(client_max, options.max_frame);
          reply = wire::handshake_response(id, model.descriptor(), negotiated);
          channel.write_frame(reply.dump());
          channel.set_max_frame(negotiated);
          continue;
        }
      } else if (op == "predict") {
        const auto image = wire::decode_image(req.at("image"));
        reply = wire::predict_response(id, model.predict(image, decode_prompt(req.at("prompt"), image)));
      } else if (op == "grad") {
        const auto image = wire::decode_image(req.at("image"));
        const auto prompt = decode_prompt(req.at("prompt"), image);
        const auto truth = wire::unpack_mask(req.at("truth_b64").get<std::string>(), image.height(), image.width());
        const auto loss = wire::decode_loss(req.at("loss"));
        loss.validate();
        std::optional<SegPgdStep> segpgd;
        if (const auto& s = req.value("segpgd", json()); !s.is_null())
          segpgd = SegPgdStep{s.at("t").get<int>(), s.at("T").get<int>()};
        std::optional<std::size_t> head;
        if (const auto& h = req.value("head", json()); !h.is_null()) head = h.get<std::size_t>();
        reply = wire::grad_response(id, model.input_gradient(image, prompt, truth, loss, segpgd, head));
      } else if (op == "shutdown") {
        channel.write_frame(wire::ok_response(id).dump());
        channel.close();
        return ServeOutcome::Shutdown;
      } else {
        reply = wire::error_response(id, "unknown op '" + op + "'");
      }
    } catch (const std::exception& e) {
      reply = wire::error_response(id, e.what());
    }
    try {
      channel.write_frame(reply.dump());
    } catch (const std::exception& e) {
      // Typically an oversize reply; the peer cannot be answered any more.
      spdlog::warn("closing connection: {}", e.what());
      channel.close();
      return ServeOutcome::ProtocolViolation;
    }
  }
}

void serve_tcp(std::uint16_t port, Segmenter& model, const ServeOptions& options,
               const std::function<void(std::uint16_t)>& on_listening) {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw IoError("socket failed");
  const int yes = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listener, 16) != 0) {
    ::close(listener);
    throw IoError(std::string("cannot listen: ") + std::strerror(errno));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_listening) on_listening(ntohs(addr.sin_port));

  // Connections run concurrently; a model that is not concurrent-safe is
  // serialized behind a lock.
  LockedSegmenter locked(model);
  Segmenter& shared = model.descriptor().concurrent_safe ? model : static_cast<Segmenter&>(locked);
  std::atomic<bool> stop{false};
  std::vector<std::thread> workers;
  for (;;) {
    const int fd = ::accept(listener, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR && !stop) continue;
      break;
    }
    if (stop) {
      ::close(fd);
      break;
    }
    workers.emplace_back([fd, &shared, &options, &stop, listener] {
      wire::FrameChannel channel(fd, fd);
      if (serve_connection(channel, shared, options) == ServeOutcome::Shutdown) {
        stop = true;
        ::shutdown(listener, SHUT_RDWR);
      }
    });
  }
  for (auto& w : workers) w.join();
  ::close(listener);
}

}  // namespace segrobust
