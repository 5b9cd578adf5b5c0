"""What a combined electric-and-acoustic listener receives.

Low frequencies pass through a 500 Hz acoustic path; everything above is
reduced to four band envelopes riding on noise carriers. The script writes
the simulated audio and the envelope matrix next to itself under output/.
"""
import pathlib

import numpy as np

from easlab import rms, save_wav
from easlab.synth import speech_like
from easlab.vocoder import (EasVocoderConfig, channel_envelopes, preemphasize,
                            save_envelopes_csv, vocode_eas)

out_dir = pathlib.Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

clean = speech_like(24000, 16000, rng_seed=7)
config = EasVocoderConfig()
simulated = vocode_eas(clean, config, utterance_id="demo_utt")

save_wav(clean, out_dir / "vocoder_input.wav")
save_wav(simulated, out_dir / "vocoder_output.wav")
print(f"wrote {out_dir / 'vocoder_input.wav'}")
print(f"wrote {out_dir / 'vocoder_output.wav'}")
print(f"rms in {rms(clean):.5f}, out {rms(simulated):.5f} "
      f"(conserved to {abs(rms(simulated) / rms(clean) - 1):.1e})")

print()
print("channel envelopes (after the +3 dB/octave emphasis):")
envelopes = channel_envelopes(preemphasize(clean, config), config)
for k, (low, high) in enumerate(config.band_edges_hz):
    level = np.sqrt(np.mean(envelopes.matrix[k] ** 2))
    bar = "#" * int(400 * level)
    print(f"  band {k} [{low:>6.0f}, {high:>6.0f}) Hz  rms {level:.4f}  {bar}")
save_envelopes_csv(envelopes, out_dir / "vocoder_envelopes.csv")
print(f"wrote {out_dir / 'vocoder_envelopes.csv'} (one row per channel)")
