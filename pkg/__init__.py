# Z-Channel Codes Package
