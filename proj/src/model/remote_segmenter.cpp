#include "segrobust/model/remote_segmenter.hpp"

#include <netdb.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstring>
#include <sstream>

extern char** environ;

namespace segrobust {

using wire::json;

namespace {

std::unique_ptr<wire::FrameChannel> connect_tcp(const std::string& host, const std::string& port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw ModelError("resolve " + host + ": " + gai_strerror(rc));
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw ModelError("cannot connect to " + host + ":" + port);
  return std::make_unique<wire::FrameChannel>(fd, fd);
}

std::pair<std::unique_ptr<wire::FrameChannel>, pid_t> spawn_command(const std::string& command) {
  std::istringstream words(command);
  std::vector<std::string> args;
  for (std::string w; words >> w;) args.push_back(w);
  if (args.empty()) throw ConfigInvalid("empty cmd: endpoint");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  int to_child[2], from_child[2];
  if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) throw ModelError("pipe failed");
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, to_child[1]);
  posix_spawn_file_actions_addclose(&actions, from_child[0]);
  pid_t pid = -1;
  const int rc = posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(to_child[0]);
  ::close(from_child[1]);
  if (rc != 0) {
    ::close(to_child[1]);
    ::close(from_child[0]);
    throw ModelError("cannot start '" + args[0] + "': " + std::strerror(rc));
  }
  return {std::make_unique<wire::FrameChannel>(from_child[0], to_child[1]), pid};
}

}  // namespace

RemoteSegmenter::RemoteSegmenter(std::unique_ptr<wire::FrameChannel> channel, RemoteOptions options,
                                 pid_t child)
    : channel_(std::move(channel)), options_(options), child_(child) {
  channel_->set_timeout_ms(options_.timeout_ms);
  channel_->set_max_frame(options_.max_frame);
  const json reply = call(wire::handshake_request(0, options_.max_frame));
  try {
    const int version = reply.at("version").get<int>();
    if (version != wire::kProtocolVersion) {
      channel_->close();
      throw ProtocolError("protocol version mismatch: server speaks " + std::to_string(version) +
                          ", client speaks " + std::to_string(wire::kProtocolVersion));
    }
    const auto& d = reply.at("descriptor");
    descriptor_ = {d.at("name").get<std::string>(), d.at("multimask").get<bool>(),
                   d.at("concurrent_safe").get<bool>()};
    if (reply.contains("max_frame"))
      channel_->set_max_frame(std::min(options_.max_frame, reply.at("max_frame").get<std::size_t>()));
  } catch (const json::exception& e) {
    channel_->close();
    throw ProtocolError(std::string("malformed handshake response: ") + e.what());
  }
  if (descriptor_.name.empty()) throw ProtocolError("handshake returned an empty model name");
}

RemoteSegmenter::~RemoteSegmenter() {
  // Only a server we spawned is told to exit; shared TCP servers just see EOF.
  if (channel_ && channel_->is_open() && child_ > 0) {
    try {
      channel_->set_timeout_ms(2000);
      channel_->write_frame(wire::shutdown_request(next_id_++).dump());
      (void)channel_->read_frame();
    } catch (...) {
    }
  }
  if (channel_) channel_->close();
  if (child_ > 0) {
    int status = 0;
    ::waitpid(child_, &status, 0);
  }
}

json RemoteSegmenter::call(const json& request) {
  if (!connected()) throw ProtocolError("connection is closed");
  json reply;
  try {
    channel_->write_frame(request.dump());
    const auto frame = channel_->read_frame();
    if (!frame) throw ProtocolError("server closed the connection");
    reply = json::parse(*frame);
    if (!reply.is_object() || reply.value("id", json()).get<std::uint64_t>() != request.at("id").get<std::uint64_t>())
      throw ProtocolError("response id does not match request id");
  } catch (const json::exception& e) {
    channel_->close();
    throw ProtocolError(std::string("malformed response: ") + e.what());
  } catch (const ModelError&) {
    // Protocol errors and timeouts leave the stream out of sync.
    channel_->close();
    throw;
  }
  if (!reply.value("ok", false)) {
    const auto& err = reply.value("error", json());
    throw RemoteError(err.is_string() ? err.get<std::string>() : std::string("remote failure"));
  }
  return reply;
}

std::vector<MaskPrediction> RemoteSegmenter::predict(const ImageTensor& image, const PointPrompt& prompt) {
  const json reply = call(wire::predict_request(next_id_++, image, prompt));
  std::vector<MaskPrediction> out;
  try {
    for (const auto& m : reply.at("masks")) {
      MaskPrediction p;
      p.mask = wire::unpack_mask(m.at("mask_b64").get<std::string>(), image.height(), image.width());
      const auto field =
          wire::unpack_f32(m.at("field_b64").get<std::string>(), static_cast<std::size_t>(image.height() * image.width()));
      p.field = Eigen::Map<const PredictionField>(field.data(), image.height(), image.width());
      p.score = m.at("score").get<double>();
      out.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    channel_->close();
    throw ProtocolError(std::string("malformed predict response: ") + e.what());
  }
  try {
    validate_predictions(out, image.height(), image.width());
  } catch (const ModelError& e) {
    throw ProtocolError(std::string("contract violation: ") + e.what());
  }
  return out;
}

InputGradient RemoteSegmenter::input_gradient(const ImageTensor& image, const PointPrompt& prompt,
                                              const BinaryMask& truth, const LossSpec& loss,
                                              const std::optional<SegPgdStep>& segpgd,
                                              std::optional<std::size_t> head) {
  if (truth.rows() != image.height() || truth.cols() != image.width())
    throw ShapeMismatch("truth mask does not match the image");
  const json reply = call(wire::grad_request(next_id_++, image, prompt, truth, loss, segpgd, head));
  InputGradient out{0, ImageTensor(image.height(), image.width())};
  try {
    out.loss = reply.at("loss").get<double>();
    const auto g = wire::unpack_f32(reply.at("grad_b64").get<std::string>(), static_cast<std::size_t>(image.size()));
    std::copy(g.begin(), g.end(), out.gradient.data());
  } catch (const json::exception& e) {
    channel_->close();
    throw ProtocolError(std::string("malformed grad response: ") + e.what());
  }
  return out;
}

std::unique_ptr<RemoteSegmenter> connect_remote(const std::string& endpoint, RemoteOptions options) {
  if (endpoint.rfind("tcp:", 0) == 0) {
    const auto rest = endpoint.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw ConfigInvalid("expected tcp:HOST:PORT, got '" + endpoint + "'");
    return std::make_unique<RemoteSegmenter>(connect_tcp(rest.substr(0, colon), rest.substr(colon + 1)), options);
  }
  if (endpoint.rfind("cmd:", 0) == 0) {
    auto [channel, pid] = spawn_command(endpoint.substr(4));
    return std::make_unique<RemoteSegmenter>(std::move(channel), options, pid);
  }
  throw ConfigInvalid("unknown model endpoint '" + endpoint + "'");
}

}  // namespace segrobust
