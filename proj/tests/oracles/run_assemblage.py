from robust_oracle import *
_, R = switch_process()
print("TTU", ttu(R))
print("TUU", tuu(R), tuu(R, 1))
print("UTT", utt(R), utt(R, 1))
