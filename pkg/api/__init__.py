"""HTTP service for panel transforms, synthetic panels and store scoring"""
