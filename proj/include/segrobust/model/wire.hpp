#ifndef SEGROBUST_MODEL_WIRE_HPP
#define SEGROBUST_MODEL_WIRE_HPP

// Length-prefixed JSON frames shared with out-of-process model servers.
// Frame = 4-byte big-endian body length + UTF-8 JSON body. The full message
// schema is in docs/protocol.md.

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segrobust/model/segmenter.hpp"

namespace segrobust::wire {

using nlohmann::json;

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kDefaultMaxFrame = 64u << 20;

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Little-endian float32 packing of a row-major buffer.
std::string pack_f32(std::span<const double> values);
std::vector<double> unpack_f32(std::string_view b64, std::size_t expected);

// Row-major bits, most significant bit first within each byte.
std::string pack_mask(const BinaryMask& mask);
BinaryMask unpack_mask(std::string_view b64, Index height, Index width);

json encode_image(const ImageTensor& image);
ImageTensor decode_image(const json& node);
json encode_loss(const LossSpec& loss);
LossSpec decode_loss(const json& node);

json handshake_request(std::uint64_t id, std::size_t max_frame);
json predict_request(std::uint64_t id, const ImageTensor& image, const PointPrompt& prompt);
json grad_request(std::uint64_t id, const ImageTensor& image, const PointPrompt& prompt,
                  const BinaryMask& truth, const LossSpec& loss, const std::optional<SegPgdStep>& segpgd,
                  std::optional<std::size_t> head);
json shutdown_request(std::uint64_t id);

json error_response(std::uint64_t id, const std::string& message);
json handshake_response(std::uint64_t id, const SegmenterDescriptor& d, std::size_t max_frame);
// Masks are re-derived from the float32 fields so the receiver's threshold
// check holds bit-for-bit.
json predict_response(std::uint64_t id, const std::vector<MaskPrediction>& preds);
json grad_response(std::uint64_t id, const InputGradient& g);
json ok_response(std::uint64_t id);

// Blocking frame transport over a pair of file descriptors (pipe ends or a
// socket used for both directions).
class FrameChannel {
 public:
  FrameChannel(int read_fd, int write_fd, bool owns_fds = true);
  ~FrameChannel();
  FrameChannel(const FrameChannel&) = delete;
  FrameChannel& operator=(const FrameChannel&) = delete;

  void set_max_frame(std::size_t bytes) { max_frame_ = bytes; }
  std::size_t max_frame() const { return max_frame_; }
  // Negative timeout waits forever.
  void set_timeout_ms(int ms) { timeout_ms_ = ms; }

  // Empty on orderly EOF before a length prefix. Throws ProtocolError for
  // oversize or truncated frames and Timeout when the peer stalls.
  std::optional<std::string> read_frame();
  void write_frame(std::string_view body);

  void close();
  bool is_open() const { return read_fd_ >= 0; }

 private:
  void read_exact(std::uint8_t* out, std::size_t n, bool allow_eof, bool& eof);

  int read_fd_;
  int write_fd_;
  bool owns_;
  std::size_t max_frame_ = kDefaultMaxFrame;
  int timeout_ms_ = -1;
};

}  // namespace segrobust::wire

#endif  // SEGROBUST_MODEL_WIRE_HPP
