#ifndef UNETAEC_WAV_H_
#define UNETAEC_WAV_H_

#include <filesystem>

#include "unetaec/audio_buffer.h"

namespace unetaec {

// 16-bit PCM mono RIFF/WAVE. Samples map to [-1, 1) by a factor of 1/32768.
// Unknown chunks are skipped. Throws FormatError for anything else (other
// encodings, multichannel, truncated data) and std::runtime_error when the
// file cannot be opened; both name the file.
AudioBuffer ReadWav(const std::filesystem::path& path);

// Rounds to the nearest 16-bit code, clamping to [-32768, 32767]. Creates
// no directories.
void WriteWav(const std::filesystem::path& path, const AudioBuffer& audio);

// Same, quantizing in memory only; what ReadWav(WriteWav(x)) would return.
AudioBuffer QuantizePcm16(const AudioBuffer& audio);

}  // namespace unetaec

#endif  // UNETAEC_WAV_H_
